#ifndef APIUSAGE_ARUS_HPP
#define APIUSAGE_ARUS_HPP

// Usage graphs, one per explored execution path of a method.
//
// Object nodes stand for objects and primitive values; action nodes for
// allocations, calls, field accesses and other operations. Control edges are
// implicit: actions are stored in execution order. Data edges link an object
// to an action that takes it as a parameter, or an action to the object it
// produces.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "apiusage/cfg.hpp"
#include "apiusage/error.hpp"
#include "apiusage/method_ir.hpp"

namespace apiusage {

struct ObjectNode {
    std::size_t id = 0;
    std::string type;
    /// Number of action nodes that existed when this object was created.
    std::size_t created_at = 0;
    friend bool operator==(const ObjectNode&, const ObjectNode&) = default;
};

enum class ActionKind { Alloc, Invoke, FieldAccess, Operation };

struct ActionNode {
    std::size_t id = 0;
    std::string label;
    ActionKind kind = ActionKind::Operation;
    std::string owner_class;  // empty for operations
    std::size_t cfg_node = 0;
    bool is_api = false;
    friend bool operator==(const ActionNode&, const ActionNode&) = default;
};

enum class DataRole { Param, Result };

struct DataEdge {
    std::size_t object = 0;
    std::size_t action = 0;
    DataRole role = DataRole::Param;
    friend bool operator==(const DataEdge&, const DataEdge&) = default;
};

struct Arus {
    std::vector<ObjectNode> objects;
    std::vector<ActionNode> actions;  // execution order; consecutive pairs are control edges
    std::vector<DataEdge> data_edges;
    std::vector<std::size_t> path;  // CFG nodes in visiting order, control nodes included

    std::size_t add_object(std::string type) {
        objects.push_back(ObjectNode{objects.size(), std::move(type), actions.size()});
        return objects.back().id;
    }

    std::size_t add_action(std::string label, ActionKind kind, std::string owner_class,
                           std::size_t cfg_node) {
        actions.push_back(
            ActionNode{actions.size(), std::move(label), kind, std::move(owner_class), cfg_node});
        return actions.back().id;
    }

    void add_edge(std::size_t object, std::size_t action, DataRole role) {
        const DataEdge e{object, action, role};
        if (std::find(data_edges.begin(), data_edges.end(), e) == data_edges.end()) {
            data_edges.push_back(e);
        }
    }

    std::vector<std::pair<std::size_t, std::size_t>> control_edges() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t i = 1; i < actions.size(); ++i) out.emplace_back(i - 1, i);
        return out;
    }

    /// Actions data-adjacent to an object, in execution order.
    std::vector<std::size_t> actions_of(std::size_t object) const {
        std::set<std::size_t> ids;
        for (const auto& e : data_edges) {
            if (e.object == object) ids.insert(e.action);
        }
        return {ids.begin(), ids.end()};
    }

    std::vector<std::size_t> objects_of(std::size_t action) const {
        std::set<std::size_t> ids;
        for (const auto& e : data_edges) {
            if (e.action == action) ids.insert(e.object);
        }
        return {ids.begin(), ids.end()};
    }

    friend bool operator==(const Arus&, const Arus&) = default;
};

/// Call awaiting a move-result.
struct PendingResult {
    std::size_t action = 0;
    std::string type;
};

struct ExplorationState {
    std::size_t start_node = Cfg::entry;
    std::vector<bool> explored;  // normal CFG nodes already executed on this path
    std::size_t explored_count = 0;
    /// explored_count at the most recent visit of each control node.
    std::map<std::size_t, std::size_t> control_visits;
    Arus arus;
    std::map<Register, std::size_t> register_map;
    std::optional<PendingResult> pending;
};

/// Fresh state: one object node per declared parameter, mapped to its register.
inline ExplorationState make_start_state(const Method& method, const Cfg& cfg) {
    ExplorationState s;
    s.explored.assign(cfg.size(), false);
    for (const auto& p : method.params) {
        s.register_map[p.reg] = s.arus.add_object(p.type);
    }
    return s;
}

namespace detail {

inline std::size_t object_for(ExplorationState& s, Register r) {
    auto it = s.register_map.find(r);
    if (it != s.register_map.end()) return it->second;
    const std::size_t id = s.arus.add_object("unknown");
    s.register_map[r] = id;
    return id;
}

inline std::string literal_type(const std::string& literal) {
    return !literal.empty() && literal.front() == '"' ? "string" : "int";
}

}  // namespace detail

/// Applies one normal instruction to the path state in place.
inline void apply_instruction(ExplorationState& s, const Instruction& in, std::size_t cfg_node) {
    using namespace instr;
    std::optional<PendingResult> next_pending;
    Arus& g = s.arus;

    if (const auto* ni = std::get_if<NewInstance>(&in)) {
        const std::size_t act =
            g.add_action(ni->class_name + ".init-alloc", ActionKind::Alloc, ni->class_name, cfg_node);
        const std::size_t obj = g.add_object(ni->class_name);
        g.add_edge(obj, act, DataRole::Result);
        s.register_map[ni->dst] = obj;
    } else if (const auto* call = std::get_if<Invoke>(&in)) {
        std::vector<std::size_t> args;
        for (Register r : call->args) args.push_back(detail::object_for(s, r));
        const std::size_t act = g.add_action(call->target.display(), ActionKind::Invoke,
                                             call->target.class_name, cfg_node);
        for (std::size_t obj : args) g.add_edge(obj, act, DataRole::Param);
        next_pending =
            PendingResult{act, call->return_type.empty() ? "unknown" : call->return_type};
    } else if (const auto* mr = std::get_if<MoveResult>(&in)) {
        if (!s.pending) {
            throw MalformedPathError("move-result at node " + std::to_string(cfg_node) +
                                     " does not follow an invoke on this path");
        }
        const std::size_t obj = g.add_object(s.pending->type);
        g.add_edge(obj, s.pending->action, DataRole::Result);
        s.register_map[mr->dst] = obj;
    } else if (const auto* c = std::get_if<Const>(&in)) {
        s.register_map[c->dst] = g.add_object(detail::literal_type(c->literal));
    } else if (const auto* mv = std::get_if<Move>(&in)) {
        s.register_map[mv->dst] = detail::object_for(s, mv->src);
    } else if (const auto* b = std::get_if<Binop>(&in)) {
        const std::size_t lhs = detail::object_for(s, b->a);
        const std::size_t rhs = detail::object_for(s, b->b);
        const std::size_t act = g.add_action(b->op, ActionKind::Operation, "", cfg_node);
        g.add_edge(lhs, act, DataRole::Param);
        g.add_edge(rhs, act, DataRole::Param);
        const std::size_t obj = g.add_object(g.objects[lhs].type);
        g.add_edge(obj, act, DataRole::Result);
        s.register_map[b->dst] = obj;
    } else if (const auto* fg = std::get_if<FieldGet>(&in)) {
        const std::size_t holder = detail::object_for(s, fg->obj);
        const std::size_t act = g.add_action(fg->field.display(), ActionKind::FieldAccess,
                                             fg->field.class_name, cfg_node);
        g.add_edge(holder, act, DataRole::Param);
        const std::size_t obj = g.add_object("unknown");
        g.add_edge(obj, act, DataRole::Result);
        s.register_map[fg->dst] = obj;
    } else if (const auto* fp = std::get_if<FieldPut>(&in)) {
        const std::size_t value = detail::object_for(s, fp->src);
        const std::size_t holder = detail::object_for(s, fp->obj);
        const std::size_t act = g.add_action(fp->field.display(), ActionKind::FieldAccess,
                                             fp->field.class_name, cfg_node);
        g.add_edge(value, act, DataRole::Param);
        g.add_edge(holder, act, DataRole::Param);
    } else {
        throw MalformedPathError("control instruction passed to apply_instruction");
    }
    s.pending = std::move(next_pending);
}

/// Value-returning form of apply_instruction; the state's start node is used
/// as the CFG position of the instruction.
inline ExplorationState update_temp_arus(ExplorationState state, const Instruction& in) {
    apply_instruction(state, in, state.start_node);
    return state;
}

/// Enumerates execution paths from the entry node and returns one usage graph
/// per path that ends at a return. Normal nodes are never re-entered through a
/// branch edge, so every loop body runs at most once; a control node is not
/// revisited unless a new normal node was executed since its last visit.
/// Paths ending at throw are dropped. Order: depth-first, fallthrough first.
inline std::vector<Arus> build_arus(const Method& method, const Cfg& cfg,
                                    std::size_t max_branch_nodes = 10) {
    const std::size_t branches = count_branch_nodes(cfg);
    if (branches > max_branch_nodes) throw BranchCapExceeded(branches, max_branch_nodes);

    std::vector<Arus> result;
    std::vector<ExplorationState> frontier;
    frontier.push_back(make_start_state(method, cfg));

    while (!frontier.empty()) {
        ExplorationState s = std::move(frontier.back());
        frontier.pop_back();

        std::size_t node = s.start_node;
        while (!cfg.is_control(node)) {
            apply_instruction(s, cfg.nodes[node], node);
            s.arus.path.push_back(node);
            if (!s.explored[node]) {
                s.explored[node] = true;
                ++s.explored_count;
            }
            node = cfg.successors[node].front();
        }
        s.arus.path.push_back(node);
        s.pending.reset();

        const Instruction& in = cfg.nodes[node];
        if (std::holds_alternative<instr::Return>(in)) {
            result.push_back(std::move(s.arus));
            continue;
        }
        if (std::holds_alternative<instr::Throw>(in)) continue;

        s.control_visits[node] = s.explored_count;
        const auto& succ = cfg.successors[node];
        for (auto it = succ.rbegin(); it != succ.rend(); ++it) {
            const std::size_t next = *it;
            if (cfg.is_control(next)) {
                auto v = s.control_visits.find(next);
                if (v != s.control_visits.end() && v->second == s.explored_count) continue;
            } else if (s.explored[next]) {
                continue;
            }
            ExplorationState fork = s;
            fork.start_node = next;
            frontier.push_back(std::move(fork));
        }
    }
    return result;
}

inline std::string arus_to_dot(const std::vector<Arus>& graphs, const std::string& name = "arus") {
    std::ostringstream os;
    os << "digraph \"" << detail::dot_escape(name) << "\" {\n";
    os << "  node [fontname=\"sans-serif\"];\n";
    for (std::size_t g = 0; g < graphs.size(); ++g) {
        const Arus& a = graphs[g];
        const std::string p = "p" + std::to_string(g) + "_";
        os << "  subgraph cluster_" << g << " {\n";
        os << "    label=\"path " << g << "\";\n";
        for (const auto& o : a.objects) {
            os << "    " << p << "o" << o.id << " [label=\"" << detail::dot_escape(o.type)
               << "\", shape=box, style=rounded];\n";
        }
        for (const auto& act : a.actions) {
            os << "    " << p << "a" << act.id << " [label=\"" << detail::dot_escape(act.label)
               << "\", shape=box];\n";
        }
        for (const auto& [from, to] : a.control_edges()) {
            os << "    " << p << "a" << from << " -> " << p << "a" << to << ";\n";
        }
        for (const auto& e : a.data_edges) {
            if (e.role == DataRole::Param) {
                os << "    " << p << "o" << e.object << " -> " << p << "a" << e.action;
            } else {
                os << "    " << p << "a" << e.action << " -> " << p << "o" << e.object;
            }
            os << " [style=dashed];\n";
        }
        os << "  }\n";
    }
    os << "}\n";
    return os.str();
}

}  // namespace apiusage

#endif  // APIUSAGE_ARUS_HPP

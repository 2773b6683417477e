#ifndef APIUSAGE_CFG_HPP
#define APIUSAGE_CFG_HPP

#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "apiusage/method_ir.hpp"

namespace apiusage {

enum class NodeKind { Normal, Control };

/// One node per instruction. Successor order: fallthrough first, then the
/// branch targets in source order.
struct Cfg {
    std::vector<Instruction> nodes;
    std::vector<NodeKind> kinds;
    std::vector<std::vector<std::size_t>> successors;

    static constexpr std::size_t entry = 0;

    std::size_t size() const { return nodes.size(); }
    bool is_control(std::size_t n) const { return kinds[n] == NodeKind::Control; }
};

inline Cfg build_cfg(const Method& method) {
    Cfg cfg;
    const std::size_t n = method.instructions.size();
    cfg.nodes = method.instructions;
    cfg.kinds.resize(n);
    cfg.successors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Instruction& in = method.instructions[i];
        auto& succ = cfg.successors[i];
        cfg.kinds[i] = apiusage::is_control(in) ? NodeKind::Control : NodeKind::Normal;
        if (const auto* b = std::get_if<instr::If>(&in)) {
            succ = {i + 1, method.label_target(b->label)};
        } else if (const auto* g = std::get_if<instr::Goto>(&in)) {
            succ = {method.label_target(g->label)};
        } else if (const auto* s = std::get_if<instr::Switch>(&in)) {
            succ.push_back(i + 1);
            for (const auto& l : s->labels) succ.push_back(method.label_target(l));
        } else if (std::holds_alternative<instr::Return>(in) ||
                   std::holds_alternative<instr::Throw>(in)) {
            // terminal
        } else {
            succ = {i + 1};
        }
    }
    return cfg;
}

/// Number of if nodes; a switch with L labels counts as L.
inline std::size_t count_branch_nodes(const Cfg& cfg) {
    std::size_t count = 0;
    for (const auto& in : cfg.nodes) {
        if (std::holds_alternative<instr::If>(in)) {
            ++count;
        } else if (const auto* s = std::get_if<instr::Switch>(&in)) {
            count += s->labels.size();
        }
    }
    return count;
}

inline std::vector<bool> reachable_nodes(const Cfg& cfg) {
    std::vector<bool> seen(cfg.size(), false);
    if (cfg.size() == 0) return seen;
    std::vector<std::size_t> stack{Cfg::entry};
    seen[Cfg::entry] = true;
    while (!stack.empty()) {
        const std::size_t n = stack.back();
        stack.pop_back();
        for (std::size_t s : cfg.successors[n]) {
            if (!seen[s]) {
                seen[s] = true;
                stack.push_back(s);
            }
        }
    }
    return seen;
}

namespace detail {

inline std::string dot_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

}  // namespace detail

inline std::string cfg_to_dot(const Cfg& cfg, const std::string& name = "cfg") {
    std::ostringstream os;
    os << "digraph \"" << detail::dot_escape(name) << "\" {\n";
    os << "  node [fontname=\"monospace\"];\n";
    for (std::size_t i = 0; i < cfg.size(); ++i) {
        os << "  n" << i << " [label=\"" << i << ": "
           << detail::dot_escape(print_instruction(cfg.nodes[i])) << "\", shape="
           << (cfg.is_control(i) ? "diamond" : "box") << "];\n";
    }
    for (std::size_t i = 0; i < cfg.size(); ++i) {
        for (std::size_t k = 0; k < cfg.successors[i].size(); ++k) {
            os << "  n" << i << " -> n" << cfg.successors[i][k];
            if (cfg.is_control(i) && cfg.successors[i].size() > 1) {
                os << " [label=\"" << (k == 0 ? "fall" : std::to_string(k)) << "\"]";
            }
            os << ";\n";
        }
    }
    os << "}\n";
    return os.str();
}

}  // namespace apiusage

#endif  // APIUSAGE_CFG_HPP

#ifndef APIUSAGE_METHOD_IR_HPP
#define APIUSAGE_METHOD_IR_HPP

// Textual register-based method listings.
//
//   .method <class>.<name> <register_count> (<vR>:<type>, ...)
//     new-instance vD <class>
//     invoke-virtual|invoke-static|invoke-direct <class>.<method> (vA, ...) [-> <type>]
//     move-result vD
//     const vD <literal>
//     move vD vS
//     binop <op> vD vA vB
//     iget vD vO <class>.<field>
//     iput vS vO <class>.<field>
//     if <cond> vA <vB|literal> :label
//     goto :label
//     switch vS :l1 :l2 ...
//     return [vR]
//     throw vR
//   .end
//
// One instruction per line, labels as `:name` on their own line, `#` starts a
// comment. Parameters occupy the highest-numbered registers of the frame.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "apiusage/error.hpp"

namespace apiusage {

struct Register {
    std::uint32_t index = 0;

    friend auto operator<=>(const Register&, const Register&) = default;
};

inline std::string to_string(Register r) { return "v" + std::to_string(r.index); }

/// A class member reference, displayed as "class_name.method_name".
struct MethodRef {
    std::string class_name;
    std::string method_name;

    std::string display() const { return class_name + "." + method_name; }

    friend bool operator==(const MethodRef&, const MethodRef&) = default;
};

enum class InvokeStyle { Virtual, Static, Direct };

namespace instr {

struct NewInstance {
    Register dst;
    std::string class_name;
    friend bool operator==(const NewInstance&, const NewInstance&) = default;
};

/// A call. It never writes a register itself; a directly following
/// MoveResult binds the result. `return_type` is empty when not declared.
struct Invoke {
    InvokeStyle style = InvokeStyle::Virtual;
    MethodRef target;
    std::vector<Register> args;
    std::string return_type;
    friend bool operator==(const Invoke&, const Invoke&) = default;
};

struct MoveResult {
    Register dst;
    friend bool operator==(const MoveResult&, const MoveResult&) = default;
};

struct Const {
    Register dst;
    std::string literal;  // quoted string literals keep their quotes
    friend bool operator==(const Const&, const Const&) = default;
};

struct Move {
    Register dst;
    Register src;
    friend bool operator==(const Move&, const Move&) = default;
};

struct Binop {
    std::string op;
    Register dst;
    Register a;
    Register b;
    friend bool operator==(const Binop&, const Binop&) = default;
};

struct FieldGet {
    Register dst;
    Register obj;
    MethodRef field;
    friend bool operator==(const FieldGet&, const FieldGet&) = default;
};

struct FieldPut {
    Register src;
    Register obj;
    MethodRef field;
    friend bool operator==(const FieldPut&, const FieldPut&) = default;
};

struct If {
    std::string cond;
    Register a;
    std::variant<Register, std::string> b;
    std::string label;
    friend bool operator==(const If&, const If&) = default;
};

struct Goto {
    std::string label;
    friend bool operator==(const Goto&, const Goto&) = default;
};

struct Switch {
    Register src;
    std::vector<std::string> labels;
    friend bool operator==(const Switch&, const Switch&) = default;
};

struct Return {
    std::optional<Register> value;
    friend bool operator==(const Return&, const Return&) = default;
};

struct Throw {
    Register src;
    friend bool operator==(const Throw&, const Throw&) = default;
};

}  // namespace instr

using Instruction = std::variant<instr::NewInstance, instr::Invoke, instr::MoveResult, instr::Const,
                                 instr::Move, instr::Binop, instr::FieldGet, instr::FieldPut,
                                 instr::If, instr::Goto, instr::Switch, instr::Return, instr::Throw>;

/// Control instructions end a straight-line run: if, goto, switch, return, throw.
inline bool is_control(const Instruction& in) {
    return std::holds_alternative<instr::If>(in) || std::holds_alternative<instr::Goto>(in) ||
           std::holds_alternative<instr::Switch>(in) || std::holds_alternative<instr::Return>(in) ||
           std::holds_alternative<instr::Throw>(in);
}

struct Param {
    Register reg;
    std::string type;
    friend bool operator==(const Param&, const Param&) = default;
};

struct Method {
    std::string owner_class;
    std::string name;
    std::uint32_t register_count = 0;
    std::vector<Param> params;
    std::vector<Instruction> instructions;
    std::map<std::string, std::size_t> labels;  // label -> instruction index

    std::string display() const { return owner_class + "." + name; }

    std::size_t label_target(const std::string& label) const { return labels.at(label); }

    friend bool operator==(const Method&, const Method&) = default;
};

namespace detail {

inline bool is_word_char(char c) {
    return !std::isspace(static_cast<unsigned char>(c)) && c != '(' && c != ')' && c != ',';
}

/// Cursor over one source line; columns are 1-based.
class LineCursor {
public:
    LineCursor(std::string_view text, std::size_t line) : text_(text), line_(line) {}

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool at_end() {
        skip_ws();
        return pos_ >= text_.size();
    }

    std::size_t column() const { return pos_ + 1; }
    std::size_t line() const { return line_; }

    [[noreturn]] void fail(const std::string& message) const {
        throw ParseError(message, line_, column());
    }

    [[noreturn]] void fail_at(const std::string& message, std::size_t column) const {
        throw ParseError(message, line_, column);
    }

    std::string word(const char* what) {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() && is_word_char(text_[pos_])) ++pos_;
        if (start == pos_) fail(std::string("expected ") + what);
        return std::string(text_.substr(start, pos_ - start));
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    void expect(char c) {
        if (!peek(c)) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    /// A string literal in double quotes (kept verbatim) or a bare word.
    std::string literal() {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == '"') {
            const std::size_t start = pos_++;
            while (pos_ < text_.size() && text_[pos_] != '"') {
                if (text_[pos_] == '\\') ++pos_;
                ++pos_;
            }
            if (pos_ >= text_.size()) fail_at("unterminated string literal", start + 1);
            ++pos_;
            return std::string(text_.substr(start, pos_ - start));
        }
        return word("literal");
    }

    void expect_end() {
        if (!at_end()) fail("unexpected trailing text");
    }

private:
    std::string_view text_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

/// Removes a trailing `#` comment, ignoring `#` inside string literals.
inline std::string_view strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted && c == '\\') {
            ++i;
        } else if (c == '"') {
            quoted = !quoted;
        } else if (c == '#' && !quoted) {
            return line.substr(0, i);
        }
    }
    return line;
}

inline std::string normalize_member_name(std::string name) {
    if (name.size() > 2 && name.front() == '<' && name.back() == '>') {
        return name.substr(1, name.size() - 2);
    }
    return name;
}

inline MethodRef parse_member(LineCursor& cur, const char* what) {
    const std::size_t col = (cur.skip_ws(), cur.column());
    const std::string text = cur.word(what);
    const auto dot = text.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == text.size()) {
        cur.fail_at(std::string("expected <class>.<name> for ") + what, col);
    }
    return MethodRef{text.substr(0, dot), normalize_member_name(text.substr(dot + 1))};
}

struct RegisterUse {
    Register reg;
    std::size_t column;
};

class MethodBuilder {
public:
    explicit MethodBuilder(Method header) : method_(std::move(header)) {}

    Register reg(LineCursor& cur) {
        cur.skip_ws();
        const std::size_t col = cur.column();
        const std::string text = cur.word("register");
        if (text.size() < 2 || text[0] != 'v' ||
            !std::all_of(text.begin() + 1, text.end(),
                         [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            cur.fail_at("expected register, got '" + text + "'", col);
        }
        unsigned long long value = 0;
        try {
            value = std::stoull(text.substr(1));
        } catch (const std::exception&) {
            cur.fail_at("register index too large: " + text, col);
        }
        if (value >= method_.register_count) {
            cur.fail_at("register " + text + " out of range (method declares " +
                            std::to_string(method_.register_count) + " registers)",
                        col);
        }
        return Register{static_cast<std::uint32_t>(value)};
    }

    std::string label_ref(LineCursor& cur) {
        cur.skip_ws();
        const std::size_t col = cur.column();
        const std::string text = cur.word("label");
        if (text.size() < 2 || text[0] != ':') cur.fail_at("expected :label, got '" + text + "'", col);
        const std::string name = text.substr(1);
        if (!label_uses_.count(name)) label_uses_.emplace(name, std::make_pair(cur.line(), col));
        return name;
    }

    void declare_label(const std::string& name, std::size_t line, std::size_t col) {
        if (method_.labels.count(name)) {
            throw ParseError("duplicate label :" + name, line, col);
        }
        method_.labels.emplace(name, method_.instructions.size());
        label_lines_.emplace(name, std::make_pair(line, col));
    }

    void instruction(LineCursor& cur) {
        const std::size_t col = (cur.skip_ws(), cur.column());
        const std::string op = cur.word("instruction");
        Instruction in = parse_instruction(op, col, cur);
        cur.expect_end();
        method_.instructions.push_back(std::move(in));
        lines_.push_back(cur.line());
    }

    Method finish(std::size_t end_line) {
        if (method_.instructions.empty()) throw ParseError("no instructions", end_line, 1);
        for (const auto& [name, where] : label_uses_) {
            if (!method_.labels.count(name)) {
                throw ParseError("undeclared label :" + name, where.first, where.second);
            }
        }
        for (const auto& [name, index] : method_.labels) {
            if (index >= method_.instructions.size()) {
                const auto& where = label_lines_.at(name);
                throw ParseError("label :" + name + " does not precede an instruction", where.first,
                                 where.second);
            }
        }
        const Instruction& last = method_.instructions.back();
        if (!std::holds_alternative<instr::Return>(last) &&
            !std::holds_alternative<instr::Throw>(last) &&
            !std::holds_alternative<instr::Goto>(last)) {
            throw ParseError("control falls off the end of the method (last instruction must be "
                             "return, throw or goto)",
                             lines_.back(), 1);
        }
        return std::move(method_);
    }

private:
    Instruction parse_instruction(const std::string& op, std::size_t col, LineCursor& cur) {
        using namespace instr;
        if (op == "new-instance") {
            Register dst = reg(cur);
            return NewInstance{dst, cur.word("class name")};
        }
        if (op == "invoke-virtual" || op == "invoke-static" || op == "invoke-direct") {
            Invoke call;
            call.style = op == "invoke-virtual"  ? InvokeStyle::Virtual
                         : op == "invoke-static" ? InvokeStyle::Static
                                                 : InvokeStyle::Direct;
            call.target = parse_member(cur, "method");
            cur.expect('(');
            if (!cur.peek(')')) {
                call.args.push_back(reg(cur));
                while (cur.peek(',')) {
                    cur.expect(',');
                    call.args.push_back(reg(cur));
                }
            }
            cur.expect(')');
            if (!cur.at_end()) {
                const std::size_t arrow_col = cur.column();
                if (cur.word("'->'") != "->") cur.fail_at("expected '-> <type>'", arrow_col);
                call.return_type = cur.word("return type");
            }
            return call;
        }
        if (op == "move-result") return MoveResult{reg(cur)};
        if (op == "const") {
            Register dst = reg(cur);
            return Const{dst, cur.literal()};
        }
        if (op == "move") {
            Register dst = reg(cur);
            return Move{dst, reg(cur)};
        }
        if (op == "binop") {
            Binop b;
            b.op = cur.word("operator");
            b.dst = reg(cur);
            b.a = reg(cur);
            b.b = reg(cur);
            return b;
        }
        if (op == "iget") {
            Register dst = reg(cur);
            Register obj = reg(cur);
            return FieldGet{dst, obj, parse_member(cur, "field")};
        }
        if (op == "iput") {
            Register src = reg(cur);
            Register obj = reg(cur);
            return FieldPut{src, obj, parse_member(cur, "field")};
        }
        if (op == "if") {
            If branch;
            branch.cond = cur.word("condition");
            branch.a = reg(cur);
            cur.skip_ws();
            if (cur.peek('v')) {
                branch.b = reg(cur);
            } else {
                branch.b = cur.literal();
            }
            branch.label = label_ref(cur);
            return branch;
        }
        if (op == "goto") return Goto{label_ref(cur)};
        if (op == "switch") {
            Switch sw;
            sw.src = reg(cur);
            while (!cur.at_end()) sw.labels.push_back(label_ref(cur));
            if (sw.labels.empty()) cur.fail("switch needs at least one label");
            return sw;
        }
        if (op == "return") {
            if (cur.at_end()) return Return{};
            return Return{reg(cur)};
        }
        if (op == "throw") return Throw{reg(cur)};
        cur.fail_at("unknown instruction '" + op + "'", col);
    }

    Method method_;
    std::vector<std::size_t> lines_;
    std::map<std::string, std::pair<std::size_t, std::size_t>> label_uses_;
    std::map<std::string, std::pair<std::size_t, std::size_t>> label_lines_;
};

inline Method parse_header(LineCursor& cur) {
    Method m;
    const MethodRef ref = parse_member(cur, "method name");
    m.owner_class = ref.class_name;
    m.name = ref.method_name;
    const std::size_t count_col = (cur.skip_ws(), cur.column());
    const std::string count = cur.word("register count");
    if (!std::all_of(count.begin(), count.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        cur.fail_at("register count must be a nonnegative integer", count_col);
    }
    try {
        const unsigned long long n = std::stoull(count);
        if (n > UINT32_MAX) throw std::out_of_range("count");
        m.register_count = static_cast<std::uint32_t>(n);
    } catch (const std::exception&) {
        cur.fail_at("register count too large", count_col);
    }

    std::vector<std::pair<Param, std::size_t>> params;
    cur.expect('(');
    if (!cur.peek(')')) {
        for (;;) {
            const std::size_t col = (cur.skip_ws(), cur.column());
            const std::string entry = cur.word("parameter");
            const auto colon = entry.find(':');
            if (colon == std::string::npos || colon + 1 == entry.size()) {
                cur.fail_at("parameter must be <vR>:<type>", col);
            }
            const std::string reg_text = entry.substr(0, colon);
            if (reg_text.size() < 2 || reg_text[0] != 'v' ||
                !std::all_of(reg_text.begin() + 1, reg_text.end(),
                             [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
                cur.fail_at("expected register in parameter, got '" + reg_text + "'", col);
            }
            unsigned long long index = 0;
            try {
                index = std::stoull(reg_text.substr(1));
            } catch (const std::exception&) {
                cur.fail_at("register index too large: " + reg_text, col);
            }
            if (index >= m.register_count) {
                cur.fail_at("parameter register " + reg_text + " out of range", col);
            }
            params.push_back(
                {Param{Register{static_cast<std::uint32_t>(index)}, entry.substr(colon + 1)}, col});
            if (!cur.peek(',')) break;
            cur.expect(',');
        }
    }
    cur.expect(')');
    cur.expect_end();

    const std::size_t n = params.size();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t expected = m.register_count - static_cast<std::uint32_t>(n - i);
        if (params[i].first.reg.index != expected) {
            cur.fail_at("parameters must occupy the last " + std::to_string(n) +
                            " registers in order; expected v" + std::to_string(expected),
                        params[i].second);
        }
        m.params.push_back(params[i].first);
    }
    return m;
}

}  // namespace detail

/// Parses every `.method ... .end` block of a listing, in order, without
/// deduplication. Text outside blocks may only be blank or comments.
inline std::vector<Method> parse_methods(std::string_view text) {
    std::vector<Method> out;
    std::optional<detail::MethodBuilder> current;
    std::string current_name;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view raw =
            text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);

        const std::string_view line = detail::strip_comment(raw);
        detail::LineCursor cur(line, line_no);
        if (cur.at_end()) continue;

        try {
            const std::size_t col = cur.column();
            if (!current) {
                const std::string head = cur.word("'.method'");
                if (head != ".method") cur.fail_at("expected '.method', got '" + head + "'", col);
                Method header = detail::parse_header(cur);
                current_name = header.display();
                current.emplace(std::move(header));
                continue;
            }
            if (line.substr(col - 1, 4) == ".end") {
                const std::string word = cur.word("'.end'");
                if (word != ".end") cur.fail_at("unknown directive '" + word + "'", col);
                cur.expect_end();
                out.push_back(current->finish(line_no));
                current.reset();
                current_name.clear();
                continue;
            }
            if (line[col - 1] == ':') {
                const std::string label = cur.word("label");
                cur.expect_end();
                if (label.size() < 2) cur.fail_at("empty label name", col);
                current->declare_label(label.substr(1), line_no, col);
                continue;
            }
            current->instruction(cur);
        } catch (const ParseError& e) {
            if (current_name.empty()) throw;
            throw ParseError("in method " + current_name + ": " + e.message(), e.line(), e.column());
        }
    }
    if (current) {
        throw ParseError("in method " + current_name + ": missing '.end'", line_no, 1);
    }
    return out;
}

/// Parses a listing that holds exactly one method.
inline Method parse_method(std::string_view text) {
    std::vector<Method> methods = parse_methods(text);
    if (methods.empty()) throw ParseError("no method found", 1, 1);
    if (methods.size() > 1) throw ParseError("expected exactly one method", 1, 1);
    return std::move(methods.front());
}

/// Keeps the first occurrence of each (owner_class, name) pair.
inline std::vector<Method> dedup_methods(std::vector<Method> methods) {
    std::set<std::pair<std::string, std::string>> seen;
    std::vector<Method> out;
    for (Method& m : methods) {
        if (seen.emplace(m.owner_class, m.name).second) out.push_back(std::move(m));
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error while reading " + path);
    return ss.str();
}

inline std::vector<Method> parse_corpus_file(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return dedup_methods(parse_methods(text));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.message(), e.line(), e.column());
    }
}

// Printing.

inline std::string mnemonic(InvokeStyle style) {
    switch (style) {
        case InvokeStyle::Virtual: return "invoke-virtual";
        case InvokeStyle::Static: return "invoke-static";
        case InvokeStyle::Direct: return "invoke-direct";
    }
    return "invoke-virtual";
}

inline std::string print_instruction(const Instruction& in) {
    using namespace instr;
    std::ostringstream os;
    std::visit(
        [&os](const auto& i) {
            using T = std::decay_t<decltype(i)>;
            if constexpr (std::is_same_v<T, NewInstance>) {
                os << "new-instance " << to_string(i.dst) << ' ' << i.class_name;
            } else if constexpr (std::is_same_v<T, Invoke>) {
                os << mnemonic(i.style) << ' ' << i.target.display() << " (";
                for (std::size_t k = 0; k < i.args.size(); ++k) {
                    os << (k ? ", " : "") << to_string(i.args[k]);
                }
                os << ')';
                if (!i.return_type.empty()) os << " -> " << i.return_type;
            } else if constexpr (std::is_same_v<T, MoveResult>) {
                os << "move-result " << to_string(i.dst);
            } else if constexpr (std::is_same_v<T, Const>) {
                os << "const " << to_string(i.dst) << ' ' << i.literal;
            } else if constexpr (std::is_same_v<T, Move>) {
                os << "move " << to_string(i.dst) << ' ' << to_string(i.src);
            } else if constexpr (std::is_same_v<T, Binop>) {
                os << "binop " << i.op << ' ' << to_string(i.dst) << ' ' << to_string(i.a) << ' '
                   << to_string(i.b);
            } else if constexpr (std::is_same_v<T, FieldGet>) {
                os << "iget " << to_string(i.dst) << ' ' << to_string(i.obj) << ' '
                   << i.field.display();
            } else if constexpr (std::is_same_v<T, FieldPut>) {
                os << "iput " << to_string(i.src) << ' ' << to_string(i.obj) << ' '
                   << i.field.display();
            } else if constexpr (std::is_same_v<T, If>) {
                os << "if " << i.cond << ' ' << to_string(i.a) << ' ';
                if (const auto* r = std::get_if<Register>(&i.b)) {
                    os << to_string(*r);
                } else {
                    os << std::get<std::string>(i.b);
                }
                os << " :" << i.label;
            } else if constexpr (std::is_same_v<T, Goto>) {
                os << "goto :" << i.label;
            } else if constexpr (std::is_same_v<T, Switch>) {
                os << "switch " << to_string(i.src);
                for (const auto& l : i.labels) os << " :" << l;
            } else if constexpr (std::is_same_v<T, Return>) {
                os << "return";
                if (i.value) os << ' ' << to_string(*i.value);
            } else if constexpr (std::is_same_v<T, Throw>) {
                os << "throw " << to_string(i.src);
            }
        },
        in);
    return os.str();
}

/// Renders a method in the listing grammar; parse_method(print_method(m)) == m.
inline std::string print_method(const Method& m) {
    std::multimap<std::size_t, std::string> labels_at;
    for (const auto& [name, index] : m.labels) labels_at.emplace(index, name);

    std::ostringstream os;
    os << ".method " << m.display() << ' ' << m.register_count << " (";
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        os << (i ? ", " : "") << to_string(m.params[i].reg) << ':' << m.params[i].type;
    }
    os << ")\n";
    for (std::size_t i = 0; i < m.instructions.size(); ++i) {
        auto [lo, hi] = labels_at.equal_range(i);
        for (auto it = lo; it != hi; ++it) os << ':' << it->second << '\n';
        os << "  " << print_instruction(m.instructions[i]) << '\n';
    }
    os << ".end\n";
    return os.str();
}

}  // namespace apiusage

#endif  // APIUSAGE_METHOD_IR_HPP

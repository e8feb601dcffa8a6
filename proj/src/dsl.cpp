#include "msynth/dsl.hpp"

#include "msynth/format.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace msynth::dsl {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NoStatements: return "no statements";
        case ErrorKind::Lexical: return "lexical error";
        case ErrorKind::Syntax: return "syntax error";
        case ErrorKind::UnknownJointKind: return "unknown joint kind";
        case ErrorKind::Arity: return "arity mismatch";
        case ErrorKind::Keyword: return "keyword mismatch";
        case ErrorKind::ForwardReference: return "forward reference";
        case ErrorKind::DuplicateName: return "duplicate name";
        case ErrorKind::Validation: return "validation error";
    }
    return "error";
}

std::string ParseResult::error_text() const {
    std::string out;
    for (const Diagnostic& d : errors) {
        if (!out.empty()) {
            out += '\n';
        }
        if (d.line > 0) {
            out += "line " + std::to_string(d.line) + ": ";
        }
        out += d.message;
    }
    return out;
}

namespace {

// ---------------------------------------------------------------------------
// Lexer (single line)

enum class Tok { Ident, Number, LParen, RParen, Comma, Equals, Dot, Minus, Plus, End };

struct Token {
    Tok type = Tok::End;
    std::string text;
    double number = 0.0;
    int column = 0;
};

struct LexError {
    int column;
    std::string message;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool lex_line(std::string_view line, std::vector<Token>& out, LexError& err) {
    std::size_t i = 0;
    while (i < line.size()) {
        const char c = line[i];
        const int col = static_cast<int>(i) + 1;
        if (c == '#') {
            break;
        }
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < line.size() && ident_char(line[j])) {
                ++j;
            }
            out.push_back({Tok::Ident, std::string(line.substr(i, j - i)), 0.0, col});
            i = j;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < line.size() && std::isdigit(static_cast<unsigned char>(line[i + 1])))) {
            std::size_t j = i;
            while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
            if (j < line.size() && line[j] == '.') {
                ++j;
                while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
            }
            if (j < line.size() && (line[j] == 'e' || line[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < line.size() && (line[k] == '+' || line[k] == '-')) ++k;
                if (k < line.size() && std::isdigit(static_cast<unsigned char>(line[k]))) {
                    while (k < line.size() && std::isdigit(static_cast<unsigned char>(line[k]))) ++k;
                    j = k;
                } else {
                    err = {static_cast<int>(j) + 1, "malformed exponent in number"};
                    return false;
                }
            }
            double value = 0.0;
            const auto res = std::from_chars(line.data() + i, line.data() + j, value);
            if (res.ec != std::errc() || res.ptr != line.data() + j || !std::isfinite(value)) {
                err = {col, "malformed number '" + std::string(line.substr(i, j - i)) + "'"};
                return false;
            }
            if (j < line.size() && ident_char(line[j])) {
                err = {static_cast<int>(j) + 1, "unexpected character after number"};
                return false;
            }
            out.push_back({Tok::Number, std::string(line.substr(i, j - i)), value, col});
            i = j;
            continue;
        }
        Tok t;
        switch (c) {
            case '(': t = Tok::LParen; break;
            case ')': t = Tok::RParen; break;
            case ',': t = Tok::Comma; break;
            case '=': t = Tok::Equals; break;
            case '.': t = Tok::Dot; break;
            case '-': t = Tok::Minus; break;
            case '+': t = Tok::Plus; break;
            default: {
                std::string shown;
                if (std::isprint(static_cast<unsigned char>(c))) {
                    shown = std::string("'") + c + "'";
                } else {
                    char buf[16];
                    std::snprintf(buf, sizeof(buf), "0x%02x", static_cast<unsigned>(static_cast<unsigned char>(c)));
                    shown = buf;
                }
                err = {col, "unexpected character " + shown};
                return false;
            }
        }
        out.push_back({t, std::string(1, c), 0.0, col});
        ++i;
    }
    out.push_back({Tok::End, "", 0.0, static_cast<int>(line.size()) + 1});
    return true;
}

// ---------------------------------------------------------------------------
// Statement syntax

struct Value {
    enum class Type { Number, Name, Tuple } type = Type::Number;
    double number = 0.0;
    std::string name;
    Point2 tuple{};
    int column = 0;
};

struct Arg {
    std::optional<std::string> keyword;
    Value value;
    int column = 0;
};

struct RawStatement {
    std::string name;
    std::string kind;
    int name_column = 0;
    int kind_column = 0;
    std::vector<Arg> args;
};

class LineParser {
public:
    explicit LineParser(const std::vector<Token>& toks) : toks_(toks) {}

    bool parse(RawStatement& out, LexError& err) {
        if (peek().type != Tok::Ident) {
            return fail(err, "expected a joint name at the start of the declaration");
        }
        out.name = peek().text;
        out.name_column = peek().column;
        ++pos_;
        if (!accept(Tok::Equals)) {
            return fail(err, "expected '=' after joint name");
        }
        if (peek().type != Tok::Ident) {
            return fail(err, "expected a joint kind after '='");
        }
        // Optional "pl." module prefix.
        if (peek().text == "pl" && toks_.size() > pos_ + 1 && toks_[pos_ + 1].type == Tok::Dot) {
            pos_ += 2;
            if (peek().type != Tok::Ident) {
                return fail(err, "expected a joint kind after 'pl.'");
            }
        }
        out.kind = peek().text;
        out.kind_column = peek().column;
        ++pos_;
        if (!accept(Tok::LParen)) {
            return fail(err, "expected '(' after joint kind");
        }
        if (!accept(Tok::RParen)) {
            for (;;) {
                Arg arg;
                arg.column = peek().column;
                if (peek().type == Tok::Ident && toks_.size() > pos_ + 1 && toks_[pos_ + 1].type == Tok::Equals) {
                    arg.keyword = peek().text;
                    pos_ += 2;
                }
                if (!value(arg.value, err)) {
                    return false;
                }
                out.args.push_back(std::move(arg));
                if (accept(Tok::Comma)) {
                    if (accept(Tok::RParen)) {
                        break;
                    }
                    continue;
                }
                if (accept(Tok::RParen)) {
                    break;
                }
                return fail(err, "expected ',' or ')' in argument list");
            }
        }
        if (peek().type != Tok::End) {
            return fail(err, "unexpected tokens after declaration (one declaration per line)");
        }
        return true;
    }

private:
    const Token& peek() const { return toks_[std::min(pos_, toks_.size() - 1)]; }

    bool accept(Tok t) {
        if (peek().type == t) {
            ++pos_;
            return true;
        }
        return false;
    }

    bool fail(LexError& err, const std::string& message) {
        err = {peek().column, message};
        return false;
    }

    bool signed_number(double& out, LexError& err) {
        double sign = 1.0;
        if (accept(Tok::Minus)) {
            sign = -1.0;
        } else {
            accept(Tok::Plus);
        }
        if (peek().type != Tok::Number) {
            return fail(err, "expected a number");
        }
        out = sign * peek().number;
        ++pos_;
        return true;
    }

    bool value(Value& v, LexError& err) {
        v.column = peek().column;
        if (peek().type == Tok::Ident) {
            v.type = Value::Type::Name;
            v.name = peek().text;
            ++pos_;
            return true;
        }
        if (accept(Tok::LParen)) {
            v.type = Value::Type::Tuple;
            if (!signed_number(v.tuple.x, err)) return false;
            if (!accept(Tok::Comma)) return fail(err, "expected ',' inside point literal");
            if (!signed_number(v.tuple.y, err)) return false;
            if (!accept(Tok::RParen)) return fail(err, "expected ')' closing point literal");
            return true;
        }
        v.type = Value::Type::Number;
        return signed_number(v.number, err);
    }

    const std::vector<Token>& toks_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Kind signatures

enum class SlotType { Ref, Number };

struct Slot {
    const char* name;
    SlotType type;
    bool required;
    std::array<const char*, 3> aliases;
};

struct Signature {
    const char* kind;
    std::vector<Slot> slots;
};

const std::vector<Signature>& signatures() {
    static const std::vector<Signature> sigs{
        {"Static",
         {{"x", SlotType::Number, true, {}}, {"y", SlotType::Number, true, {}}}},
        {"Crank",
         {{"p0", SlotType::Ref, true, {"joint0", "parent", nullptr}},
          {"distance", SlotType::Number, true, {"radius", nullptr, nullptr}},
          {"angle", SlotType::Number, true, {"angle_step", nullptr, nullptr}},
          {"x", SlotType::Number, false, {}},
          {"y", SlotType::Number, false, {}}}},
        {"Revolute",
         {{"p0", SlotType::Ref, true, {"joint0", "parent0", nullptr}},
          {"d0", SlotType::Number, true, {"distance0", nullptr, nullptr}},
          {"p1", SlotType::Ref, true, {"joint1", "parent1", nullptr}},
          {"d1", SlotType::Number, true, {"distance1", nullptr, nullptr}},
          {"x", SlotType::Number, false, {}},
          {"y", SlotType::Number, false, {}}}},
        {"Linear",
         {{"p0", SlotType::Ref, true, {"joint0", "parent", nullptr}},
          {"revolute_radius", SlotType::Number, true, {"radius", "distance", nullptr}},
          {"la", SlotType::Ref, true, {"joint1", "line_a", nullptr}},
          {"lb", SlotType::Ref, true, {"joint2", "line_b", nullptr}},
          {"x", SlotType::Number, false, {}},
          {"y", SlotType::Number, false, {}}}},
    };
    return sigs;
}

const Signature* find_signature(const std::string& kind) {
    for (const Signature& s : signatures()) {
        if (kind == s.kind) {
            return &s;
        }
    }
    return nullptr;
}

int slot_index(const Signature& sig, const std::string& keyword) {
    for (std::size_t i = 0; i < sig.slots.size(); ++i) {
        const Slot& s = sig.slots[i];
        if (keyword == s.name) {
            return static_cast<int>(i);
        }
        for (const char* alias : s.aliases) {
            if (alias && keyword == alias) {
                return static_cast<int>(i);
            }
        }
    }
    return -1;
}

struct LineContext {
    int line;
    std::vector<Diagnostic>* errors;
    const std::set<std::string>* declared;
    const std::set<std::string>* later;

    void report(int column, ErrorKind kind, std::string message) const {
        errors->push_back({line, column, kind, std::move(message)});
    }
};

std::optional<JointRef> to_ref(const Value& v, const std::string& slot, const LineContext& ctx) {
    switch (v.type) {
        case Value::Type::Tuple:
            return JointRef{v.tuple};
        case Value::Type::Name:
            if (!ctx.declared->count(v.name)) {
                ctx.report(v.column, ErrorKind::ForwardReference,
                           "forward reference: '" + v.name + "' is not declared before this line" +
                               (ctx.later->count(v.name) ? "" : " (never declared)"));
                return std::nullopt;
            }
            return JointRef{v.name};
        case Value::Type::Number:
            ctx.report(v.column, ErrorKind::Arity,
                       "argument '" + slot + "' expects a joint name or (x, y) point, got a number");
            return std::nullopt;
    }
    return std::nullopt;
}

std::optional<double> to_number(const Value& v, const std::string& slot, const LineContext& ctx) {
    if (v.type == Value::Type::Number) {
        return v.number;
    }
    ctx.report(v.column, ErrorKind::Arity, "argument '" + slot + "' expects a number");
    return std::nullopt;
}

std::optional<Joint> build_joint(const RawStatement& raw, const LineContext& ctx) {
    const Signature* sig = find_signature(raw.kind);
    if (!sig) {
        ctx.report(raw.kind_column, ErrorKind::UnknownJointKind,
                   "unknown joint kind '" + raw.kind + "' (expected Static, Crank, Revolute or Linear)");
        return std::nullopt;
    }
    std::vector<const Value*> assigned(sig->slots.size(), nullptr);
    bool ok = true;
    bool seen_keyword = false;
    std::size_t positional = 0;
    for (const Arg& arg : raw.args) {
        int idx = -1;
        if (arg.keyword) {
            seen_keyword = true;
            idx = slot_index(*sig, *arg.keyword);
            if (idx < 0) {
                ctx.report(arg.column, ErrorKind::Keyword,
                           "unknown keyword '" + *arg.keyword + "' for " + raw.kind);
                ok = false;
                continue;
            }
        } else {
            if (seen_keyword) {
                ctx.report(arg.column, ErrorKind::Arity, "positional argument after keyword argument");
                ok = false;
                continue;
            }
            if (positional >= sig->slots.size()) {
                ctx.report(arg.column, ErrorKind::Arity,
                           raw.kind + " takes at most " + std::to_string(sig->slots.size()) + " arguments");
                ok = false;
                continue;
            }
            idx = static_cast<int>(positional++);
        }
        if (assigned[static_cast<std::size_t>(idx)]) {
            ctx.report(arg.column, ErrorKind::Keyword,
                       "argument '" + std::string(sig->slots[static_cast<std::size_t>(idx)].name) +
                           "' given more than once");
            ok = false;
            continue;
        }
        assigned[static_cast<std::size_t>(idx)] = &arg.value;
    }
    for (std::size_t i = 0; i < sig->slots.size(); ++i) {
        if (sig->slots[i].required && !assigned[i]) {
            ctx.report(raw.kind_column, ErrorKind::Arity,
                       raw.kind + " is missing required argument '" + sig->slots[i].name + "'");
            ok = false;
        }
    }
    if (!ok) {
        return std::nullopt;
    }

    std::vector<std::optional<JointRef>> refs(sig->slots.size());
    std::vector<std::optional<double>> nums(sig->slots.size());
    for (std::size_t i = 0; i < sig->slots.size(); ++i) {
        if (!assigned[i]) {
            continue;
        }
        if (sig->slots[i].type == SlotType::Ref) {
            refs[i] = to_ref(*assigned[i], sig->slots[i].name, ctx);
            ok = ok && refs[i].has_value();
        } else {
            nums[i] = to_number(*assigned[i], sig->slots[i].name, ctx);
            ok = ok && nums[i].has_value();
        }
    }
    if (!ok) {
        return std::nullopt;
    }

    auto guess = [&](std::size_t xi) -> std::optional<Point2> {
        const bool hx = nums[xi].has_value();
        const bool hy = nums[xi + 1].has_value();
        if (hx != hy) {
            ctx.report(raw.kind_column, ErrorKind::Arity, "x and y must be given together");
            ok = false;
            return std::nullopt;
        }
        if (!hx) {
            return std::nullopt;
        }
        return Point2{*nums[xi], *nums[xi + 1]};
    };

    Joint joint;
    joint.name = raw.name;
    const std::string kind = sig->kind;
    if (kind == "Static") {
        joint.kind = StaticJoint{{*nums[0], *nums[1]}};
    } else if (kind == "Crank") {
        joint.kind = CrankJoint{*refs[0], *nums[1], *nums[2], guess(3)};
    } else if (kind == "Revolute") {
        joint.kind = RevoluteJoint{*refs[0], *nums[1], *refs[2], *nums[3], guess(4)};
    } else {
        joint.kind = LinearJoint{*refs[0], *nums[1], *refs[2], *refs[3], guess(4)};
    }
    if (!ok) {
        return std::nullopt;
    }
    return joint;
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

bool blank_or_comment(std::string_view line) {
    for (char c : line) {
        if (c == '#') {
            return true;
        }
        if (c != ' ' && c != '\t' && c != '\r') {
            return false;
        }
    }
    return true;
}

// Pre-pass: names in the order they appear on the left of '='. Used to tell
// "declared later" from "never declared" in messages.
std::set<std::string> declared_names(const std::vector<std::string_view>& lines) {
    std::set<std::string> names;
    for (std::string_view line : lines) {
        std::vector<Token> toks;
        LexError err{};
        if (!lex_line(line, toks, err)) continue;
        if (toks.size() >= 2 && toks[0].type == Tok::Ident && toks[1].type == Tok::Equals) {
            names.insert(toks[0].text);
        }
    }
    return names;
}

bool statement_syntax_ok(std::string_view line) {
    if (blank_or_comment(line)) {
        return false;
    }
    std::vector<Token> toks;
    LexError err{};
    if (!lex_line(line, toks, err)) {
        return false;
    }
    RawStatement raw;
    LineParser parser(toks);
    return parser.parse(raw, err) && find_signature(raw.kind) != nullptr;
}

}  // namespace

ParseResult parse(std::string_view text) {
    ParseResult result;
    const auto lines = split_lines(text);
    const std::set<std::string> all_names = declared_names(lines);
    std::set<std::string> declared;
    std::map<std::string, int> line_of;

    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::string_view line = lines[li];
        const int line_no = static_cast<int>(li) + 1;
        if (blank_or_comment(line)) {
            continue;
        }
        std::vector<Token> toks;
        LexError err{};
        if (!lex_line(line, toks, err)) {
            result.errors.push_back({line_no, err.column, ErrorKind::Lexical, err.message});
            continue;
        }
        RawStatement raw;
        LineParser parser(toks);
        if (!parser.parse(raw, err)) {
            result.errors.push_back({line_no, err.column, ErrorKind::Syntax, err.message});
            continue;
        }
        const LineContext ctx{line_no, &result.errors, &declared, &all_names};
        if (declared.count(raw.name)) {
            ctx.report(raw.name_column, ErrorKind::DuplicateName,
                       "duplicate joint name '" + raw.name + "' (first declared on line " +
                           std::to_string(line_of[raw.name]) + ")");
            continue;
        }
        std::optional<Joint> joint = build_joint(raw, ctx);
        declared.insert(raw.name);
        line_of[raw.name] = line_no;
        if (joint) {
            result.document.statements.push_back({std::move(*joint), {line_no, raw.name_column}});
        }
    }

    if (result.document.statements.empty() && result.errors.empty()) {
        result.errors.push_back({0, 0, ErrorKind::NoStatements, "no statements"});
    }
    if (!result.errors.empty()) {
        return result;
    }

    MechanismSpec spec;
    for (const Statement& s : result.document.statements) {
        spec.joints.push_back(s.joint);
    }
    for (const ValidationError& v : validate(spec)) {
        int line_no = 0;
        if (!v.joint.empty() && line_of.count(v.joint)) {
            line_no = line_of[v.joint];
        }
        result.errors.push_back({line_no, line_no > 0 ? 1 : 0, ErrorKind::Validation, v.message});
    }
    if (result.errors.empty()) {
        result.spec = std::move(spec);
    }
    return result;
}

std::optional<std::string> extract_block(std::string_view agent_text) {
    const auto lines = split_lines(agent_text);

    // Fenced blocks: ``` optionally followed by a language tag.
    std::optional<std::string> last_block;
    bool inside = false;
    std::string current;
    for (std::string_view raw : lines) {
        std::string_view line = raw;
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
        if (line.starts_with("```")) {
            if (inside) {
                last_block = current;
                current.clear();
                inside = false;
            } else {
                inside = true;
                current.clear();
            }
            continue;
        }
        if (inside) {
            current.append(raw);
            current.push_back('\n');
        }
    }
    if (last_block) {
        return last_block;
    }

    std::size_t best_start = 0, best_len = 0, run_start = 0, run_len = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (statement_syntax_ok(lines[i])) {
            if (run_len == 0) run_start = i;
            ++run_len;
            if (run_len > best_len) {
                best_len = run_len;
                best_start = run_start;
            }
        } else {
            run_len = 0;
        }
    }
    if (best_len == 0) {
        return std::nullopt;
    }
    std::string out;
    for (std::size_t i = best_start; i < best_start + best_len; ++i) {
        out.append(lines[i]);
        out.push_back('\n');
    }
    return out;
}

namespace {

std::string ref_text(const JointRef& ref) {
    if (const auto* p = std::get_if<Point2>(&ref)) {
        return "(" + format_real(p->x) + ", " + format_real(p->y) + ")";
    }
    return std::get<std::string>(ref);
}

std::string guess_text(const std::optional<Point2>& p) {
    if (!p) {
        return "";
    }
    return ", x=" + format_real(p->x) + ", y=" + format_real(p->y);
}

}  // namespace

std::string format_canonical(const MechanismSpec& spec) {
    std::string out;
    for (const Joint& j : spec.joints) {
        out += j.name + " = ";
        if (const auto* s = std::get_if<StaticJoint>(&j.kind)) {
            out += "Static(x=" + format_real(s->position.x) + ", y=" + format_real(s->position.y) + ")";
        } else if (const auto* c = std::get_if<CrankJoint>(&j.kind)) {
            out += "Crank(p0=" + ref_text(c->parent) + ", distance=" + format_real(c->distance) +
                   ", angle=" + format_real(c->angle_step) + guess_text(c->initial) + ")";
        } else if (const auto* r = std::get_if<RevoluteJoint>(&j.kind)) {
            out += "Revolute(p0=" + ref_text(r->parent0) + ", d0=" + format_real(r->distance0) +
                   ", p1=" + ref_text(r->parent1) + ", d1=" + format_real(r->distance1) + guess_text(r->initial) +
                   ")";
        } else if (const auto* l = std::get_if<LinearJoint>(&j.kind)) {
            out += "Linear(p0=" + ref_text(l->parent) + ", revolute_radius=" + format_real(l->revolute_radius) +
                   ", la=" + ref_text(l->line_a) + ", lb=" + ref_text(l->line_b) + guess_text(l->initial) + ")";
        }
        out += '\n';
    }
    return out;
}

const std::string& api_documentation() {
    static const std::string doc =
        "Write one joint declaration per line, in dependency order:\n"
        "  name = Static(x, y)                                  fixed ground pivot\n"
        "  name = Crank(p0, distance, angle[, x, y])            driven link rotating about p0 by `angle` "
        "radians per step\n"
        "  name = Revolute(p0, d0, p1, d1[, x, y])              pin joint at distance d0 from p0 and d1 "
        "from p1\n"
        "  name = Linear(p0, revolute_radius, la, lb[, x, y])   slider on the line through la and lb, at "
        "distance revolute_radius from p0\n"
        "Parent slots (p0, p1, la, lb) take a previously declared joint name or a fixed point written (x, y).\n"
        "Arguments may be positional or keyword (e.g. distance=1, angle=0.1); x, y give the initial position "
        "used to pick the assembly branch.\n"
        "Lines starting with # are comments. Exactly one joint must be named target: its path is the "
        "mechanism output. At least one Crank is required.";
    return doc;
}

}  // namespace msynth::dsl

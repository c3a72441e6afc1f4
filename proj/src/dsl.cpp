#include "webskill/dsl.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <sstream>

namespace webskill {

namespace {

constexpr std::array<std::string_view, kPrimitiveKindCount> kPrimitiveNames = {
    "noop", "click", "hover", "type", "press", "scroll",
    "tab_focus", "new_tab", "tab_close", "go_back", "go_forward", "goto",
};

constexpr std::array<ValueKind, 0> kNoArgs{};
constexpr std::array<ValueKind, 1> kSelectorArg{ValueKind::Selector};
constexpr std::array<ValueKind, 2> kTypeArgs{ValueKind::Selector, ValueKind::Text};
constexpr std::array<ValueKind, 1> kTextArg{ValueKind::Text};
constexpr std::array<ValueKind, 1> kIntegerArg{ValueKind::Integer};

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_selector_char(char c) { return is_ident_char(c) || c == '-' || c == '.'; }

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        auto c = static_cast<unsigned char>(s[i]);
        int extra = 0;
        if (c < 0x80) extra = 0;
        else if ((c & 0xE0) == 0xC0 && c >= 0xC2) extra = 1;
        else if ((c & 0xF0) == 0xE0) extra = 2;
        else if ((c & 0xF8) == 0xF0 && c <= 0xF4) extra = 3;
        else return false;
        for (int k = 1; k <= extra; ++k) {
            if (i + k >= s.size()) return false;
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return false;
        }
        i += extra + 1;
    }
    return true;
}

enum class Tok { Ident, Selector, String, Integer, LParen, RParen, LBrace, RBrace, Comma, Semi, Colon, Newline, End };

std::string_view tok_name(Tok t) {
    switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Selector: return "selector";
    case Tok::String: return "string";
    case Tok::Integer: return "integer";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::Comma: return "','";
    case Tok::Semi: return "';'";
    case Tok::Colon: return "':'";
    case Tok::Newline: return "newline";
    case Tok::End: return "end of input";
    }
    return "?";
}

struct Token {
    Tok kind = Tok::End;
    std::string text;  // identifier, selector id, unescaped string
    std::int64_t integer = 0;
    SourcePos pos;
};

class Lexer {
public:
    explicit Lexer(const SourceText& src) : src_(src), text_(src.text()) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_blanks();
            Token t;
            t.pos = src_.position_of(i_);
            if (i_ >= text_.size()) {
                t.kind = Tok::End;
                out.push_back(t);
                return out;
            }
            char c = text_[i_];
            if (c == '\n') { t.kind = Tok::Newline; ++i_; }
            else if (c == '(') { t.kind = Tok::LParen; ++i_; }
            else if (c == ')') { t.kind = Tok::RParen; ++i_; }
            else if (c == '{') { t.kind = Tok::LBrace; ++i_; }
            else if (c == '}') { t.kind = Tok::RBrace; ++i_; }
            else if (c == ',') { t.kind = Tok::Comma; ++i_; }
            else if (c == ';') { t.kind = Tok::Semi; ++i_; }
            else if (c == ':') { t.kind = Tok::Colon; ++i_; }
            else if (c == '#') { lex_selector(t); }
            else if (c == '"') { lex_string(t); }
            else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '-' && i_ + 1 < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i_ + 1])))) { lex_integer(t); }
            else if (is_ident_start(c)) {
                std::size_t start = i_;
                while (i_ < text_.size() && is_ident_char(text_[i_])) ++i_;
                t.kind = Tok::Ident;
                t.text = text_.substr(start, i_ - start);
            } else {
                throw ParseError(ErrorCode::SyntaxError, src_.name(), t.pos,
                                 std::string("unexpected character '") + c + "'");
            }
            out.push_back(std::move(t));
        }
    }

private:
    void skip_blanks() {
        while (i_ < text_.size()) {
            char c = text_[i_];
            if (c == ' ' || c == '\t') { ++i_; continue; }
            if (c == '/' && i_ + 1 < text_.size() && text_[i_ + 1] == '/') {
                while (i_ < text_.size() && text_[i_] != '\n') ++i_;
                continue;
            }
            break;
        }
    }

    void lex_selector(Token& t) {
        std::size_t start = ++i_;
        while (i_ < text_.size() && is_selector_char(text_[i_])) ++i_;
        if (i_ == start)
            throw ParseError(ErrorCode::SyntaxError, src_.name(), t.pos, "expected element id after '#'");
        t.kind = Tok::Selector;
        t.text = text_.substr(start, i_ - start);
    }

    void lex_string(Token& t) {
        ++i_;
        std::string out;
        for (;;) {
            if (i_ >= text_.size() || text_[i_] == '\n')
                throw ParseError(ErrorCode::SyntaxError, src_.name(), t.pos, "unterminated string literal");
            char c = text_[i_++];
            if (c == '"') break;
            if (c == '\\') {
                if (i_ >= text_.size())
                    throw ParseError(ErrorCode::SyntaxError, src_.name(), t.pos, "unterminated string literal");
                char e = text_[i_++];
                switch (e) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default:
                    throw ParseError(ErrorCode::SyntaxError, src_.name(), src_.position_of(i_ - 2),
                                     std::string("unknown escape '\\") + e + "'");
                }
                continue;
            }
            out += c;
        }
        t.kind = Tok::String;
        t.text = std::move(out);
    }

    void lex_integer(Token& t) {
        std::size_t start = i_;
        if (text_[i_] == '-') ++i_;
        while (i_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i_]))) ++i_;
        auto digits = std::string_view(text_).substr(start, i_ - start);
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
        if (ec != std::errc{} || ptr != digits.data() + digits.size())
            throw ParseError(ErrorCode::SyntaxError, src_.name(), t.pos, "integer literal out of range");
        if (i_ < text_.size() && is_ident_char(text_[i_]))
            throw ParseError(ErrorCode::SyntaxError, src_.name(), t.pos, "malformed integer literal");
        t.kind = Tok::Integer;
        t.integer = v;
    }

    const SourceText& src_;
    const std::string& text_;
    std::size_t i_ = 0;
};

class Parser {
public:
    Parser(const SourceText& src, std::vector<Token> toks) : src_(src), toks_(std::move(toks)) {}

    SkillFile file() {
        skip_seps();
        const Token& head = peek();
        SkillFile out;
        if (is_kw(head, "interface")) out = interface_decl();
        else if (is_kw(head, "implementation")) out = implementation_decl();
        else error(head, "expected 'interface' or 'implementation'");
        skip_seps();
        expect(Tok::End);
        return out;
    }

    std::vector<Statement> statement_list() {
        std::vector<Statement> out;
        skip_seps();
        while (peek().kind != Tok::End) {
            out.push_back(statement());
            if (peek().kind != Tok::End) {
                if (!is_sep(peek())) error(peek(), "expected ';' or newline between statements");
                skip_seps();
            }
        }
        return out;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }
    const Token& advance() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

    static bool is_kw(const Token& t, std::string_view kw) { return t.kind == Tok::Ident && t.text == kw; }
    static bool is_sep(const Token& t) { return t.kind == Tok::Semi || t.kind == Tok::Newline; }

    void skip_seps() { while (is_sep(peek())) ++pos_; }
    void skip_newlines() { while (peek().kind == Tok::Newline) ++pos_; }

    [[noreturn]] void error(const Token& at, const std::string& msg, ErrorCode code = ErrorCode::SyntaxError) const {
        throw ParseError(code, src_.name(), at.pos, msg);
    }

    const Token& expect(Tok kind) {
        if (peek().kind != kind)
            error(peek(), "expected " + std::string(tok_name(kind)) + ", found " + std::string(tok_name(peek().kind)));
        return advance();
    }

    void expect_kw(std::string_view kw) {
        if (!is_kw(peek(), kw)) error(peek(), "expected '" + std::string(kw) + "'");
        advance();
    }

    std::string ident() { return expect(Tok::Ident).text; }

    int optional_at() {
        if (!is_kw(peek(), "at")) return 0;
        advance();
        const Token& t = expect(Tok::Integer);
        if (t.integer < 0 || t.integer > 1'000'000'000) error(t, "creation step out of range");
        return static_cast<int>(t.integer);
    }

    std::vector<Param> params() {
        expect(Tok::LParen);
        std::vector<Param> out;
        skip_newlines();
        if (peek().kind != Tok::RParen) {
            for (;;) {
                skip_newlines();
                Param p;
                p.name = ident();
                if (peek().kind == Tok::Colon) {
                    advance();
                    const Token& k = expect(Tok::Ident);
                    auto kind = value_kind_from_name(k.text);
                    if (!kind) error(k, "unknown parameter kind '" + k.text + "'");
                    p.kind = *kind;
                }
                out.push_back(std::move(p));
                skip_newlines();
                if (peek().kind != Tok::Comma) break;
                advance();
            }
        }
        skip_newlines();
        expect(Tok::RParen);
        return out;
    }

    SkillSignature signature_head() {
        SkillSignature sig;
        sig.name = ident();
        sig.params = params();
        if (peek().kind == Tok::String) sig.doc = advance().text;
        return sig;
    }

    std::vector<Statement> block() {
        expect(Tok::LBrace);
        std::vector<Statement> out;
        skip_seps();
        while (peek().kind != Tok::RBrace) {
            if (peek().kind == Tok::End) error(peek(), "unterminated block");
            out.push_back(statement());
            if (peek().kind != Tok::RBrace) {
                if (!is_sep(peek())) error(peek(), "expected ';' or newline between statements");
                skip_seps();
            }
        }
        expect(Tok::RBrace);
        return out;
    }

    SkillDef skill_def(SkillOrigin origin) {
        expect_kw("skill");
        SkillDef def;
        def.origin = origin;
        def.signature = signature_head();
        def.created_at = optional_at();
        def.body = block();
        return def;
    }

    CategoryInterface interface_decl() {
        expect_kw("interface");
        CategoryInterface iface;
        iface.id = ident();
        expect_kw("category");
        iface.category = ident();
        expect(Tok::LBrace);
        skip_seps();
        while (peek().kind != Tok::RBrace) {
            const Token& t = peek();
            if (is_kw(t, "abstract")) {
                advance();
                iface.abstract_signatures.push_back(signature_head());
            } else if (is_kw(t, "default")) {
                advance();
                iface.default_methods.push_back(skill_def(SkillOrigin::Default));
            } else {
                error(t, "expected 'abstract' or 'default' in interface body");
            }
            skip_seps();
        }
        expect(Tok::RBrace);
        return iface;
    }

    SiteImplementation implementation_decl() {
        expect_kw("implementation");
        SiteImplementation impl;
        impl.id = ident();
        expect_kw("implements");
        impl.implements = ident();
        expect_kw("site");
        impl.site = ident();
        impl.created_at = optional_at();
        expect(Tok::LBrace);
        skip_seps();
        while (peek().kind != Tok::RBrace) {
            const Token& t = peek();
            SkillOrigin origin = SkillOrigin::HandWritten;
            if (is_kw(t, "induced")) { advance(); origin = SkillOrigin::Induced; }
            else if (is_kw(t, "handwritten")) { advance(); origin = SkillOrigin::HandWritten; }
            else if (!is_kw(t, "skill")) error(t, "expected 'skill' in implementation body");
            impl.methods.push_back(skill_def(origin));
            skip_seps();
        }
        expect(Tok::RBrace);
        return impl;
    }

    Expr expr() {
        const Token& t = advance();
        switch (t.kind) {
        case Tok::Selector: return Expr{Value::make_selector(t.text)};
        case Tok::String: return Expr{Value::make_text(t.text)};
        case Tok::Integer: return Expr{Value::make_integer(t.integer)};
        case Tok::Ident: return Expr{ParamRef{t.text}};
        default: error(t, "expected argument, found " + std::string(tok_name(t.kind)));
        }
    }

    std::vector<Expr> args() {
        expect(Tok::LParen);
        std::vector<Expr> out;
        skip_newlines();
        if (peek().kind != Tok::RParen) {
            for (;;) {
                skip_newlines();
                out.push_back(expr());
                skip_newlines();
                if (peek().kind != Tok::Comma) break;
                advance();
            }
        }
        skip_newlines();
        expect(Tok::RParen);
        return out;
    }

    Statement statement() {
        const Token& head = peek();
        Statement st;
        st.pos = head.pos;
        if (head.kind != Tok::Ident) error(head, "expected statement");
        std::string word = head.text;
        std::string lowered = word;
        std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (lowered == "stop" && peek(1).kind != Tok::LParen) {
            advance();
            st.node = StopStmt{};
            return st;
        }
        if (lowered == "call" && peek(1).kind == Tok::Ident) {
            advance();
            CallStmt call;
            call.target = advance().text;
            call.args = args();
            st.node = std::move(call);
            return st;
        }
        auto kind = primitive_from_name(word);
        if (!kind) error(head, "unknown primitive '" + word + "'", ErrorCode::UnknownPrimitive);
        advance();
        PrimStmt prim;
        prim.kind = *kind;
        if (peek().kind == Tok::LParen) prim.args = args();
        auto expected = primitive_arg_kinds(*kind);
        if (prim.args.size() != expected.size()) {
            error(head, std::string(to_string(*kind)) + " takes " + std::to_string(expected.size()) +
                            " argument(s), got " + std::to_string(prim.args.size()),
                  ErrorCode::ArityError);
        }
        for (std::size_t i = 0; i < expected.size(); ++i) {
            const Expr& a = prim.args[i];
            if (!a.is_param() && a.value().kind != expected[i]) {
                error(head, std::string(to_string(*kind)) + " argument " + std::to_string(i + 1) + " must be " +
                                std::string(to_string(expected[i])),
                      ErrorCode::ArgumentKind);
            }
        }
        st.node = std::move(prim);
        return st;
    }

    const SourceText& src_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

std::string quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    out += '"';
    return out;
}

std::string print_params(const std::vector<Param>& params) {
    std::string out = "(";
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) out += ", ";
        out += params[i].name;
        out += ": ";
        out += to_string(params[i].kind);
    }
    return out + ")";
}

std::string print_args(const std::vector<Expr>& args) {
    std::string out = "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ", ";
        out += print(args[i]);
    }
    return out + ")";
}

void print_block(std::ostringstream& os, const std::vector<Statement>& body, std::string_view indent) {
    if (body.empty()) {
        os << "{ }\n";
        return;
    }
    os << "{\n";
    for (const auto& st : body) os << indent << "  " << print(st) << "\n";
    os << indent << "}\n";
}

void print_skill(std::ostringstream& os, const SkillDef& def, std::string_view prefix) {
    os << "  " << prefix << "skill " << def.signature.name << print_params(def.signature.params);
    if (!def.signature.doc.empty()) os << " " << quote(def.signature.doc);
    os << " at " << def.created_at << " ";
    print_block(os, def.body, "  ");
}

} // namespace

std::string_view to_string(PrimitiveKind kind) { return kPrimitiveNames[static_cast<int>(kind)]; }

std::string_view to_string(ValueKind kind) {
    switch (kind) {
    case ValueKind::Text: return "text";
    case ValueKind::Integer: return "integer";
    case ValueKind::Selector: return "selector";
    }
    return "?";
}

std::string_view to_string(SkillOrigin origin) {
    switch (origin) {
    case SkillOrigin::HandWritten: return "handwritten";
    case SkillOrigin::Induced: return "induced";
    case SkillOrigin::Default: return "default";
    }
    return "?";
}

std::optional<PrimitiveKind> primitive_from_name(std::string_view name) {
    for (int i = 0; i < kPrimitiveKindCount; ++i)
        if (kPrimitiveNames[i] == name) return static_cast<PrimitiveKind>(i);
    return std::nullopt;
}

std::optional<ValueKind> value_kind_from_name(std::string_view name) {
    if (name == "text") return ValueKind::Text;
    if (name == "integer") return ValueKind::Integer;
    if (name == "selector") return ValueKind::Selector;
    return std::nullopt;
}

std::span<const ValueKind> primitive_arg_kinds(PrimitiveKind kind) {
    switch (kind) {
    case PrimitiveKind::Click:
    case PrimitiveKind::Hover: return kSelectorArg;
    case PrimitiveKind::Type: return kTypeArgs;
    case PrimitiveKind::Press:
    case PrimitiveKind::Scroll:
    case PrimitiveKind::Goto: return kTextArg;
    case PrimitiveKind::TabFocus: return kIntegerArg;
    default: return kNoArgs;
    }
}

Statement Statement::prim(PrimitiveAction action) {
    PrimStmt p;
    p.kind = action.kind;
    for (auto& v : action.args) p.args.push_back(Expr{std::move(v)});
    return Statement{std::move(p), {}};
}

Statement Statement::call(std::string target, std::vector<Expr> args) {
    return Statement{CallStmt{std::move(target), std::move(args)}, {}};
}

const SkillSignature* CategoryInterface::find_signature(std::string_view name) const {
    for (const auto& s : abstract_signatures)
        if (s.name == name) return &s;
    return nullptr;
}

const SkillDef* CategoryInterface::find_default(std::string_view name) const {
    for (const auto& d : default_methods)
        if (d.name() == name) return &d;
    return nullptr;
}

const SkillDef* SiteImplementation::find_method(std::string_view name) const {
    for (const auto& m : methods)
        if (m.name() == name) return &m;
    return nullptr;
}

SourceText::SourceText(std::string name, std::string_view raw) : name_(std::move(name)) {
    text_.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '\r') {
            text_ += '\n';
            if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
        } else {
            text_ += raw[i];
        }
    }
    line_starts_.push_back(0);
    for (std::size_t i = 0; i < text_.size(); ++i)
        if (text_[i] == '\n') line_starts_.push_back(i + 1);
    if (!valid_utf8(text_)) throw ParseError(ErrorCode::SyntaxError, name_, {1, 1}, "input is not valid UTF-8");
}

SourcePos SourceText::position_of(std::size_t offset) const {
    auto it = std::upper_bound(line_starts_.begin(), line_starts_.end(), offset);
    auto line = static_cast<int>(it - line_starts_.begin());
    auto col = static_cast<int>(offset - line_starts_[line - 1]) + 1;
    return {line, col};
}

ParseError::ParseError(ErrorCode code, std::string file, SourcePos pos, const std::string& message)
    : Error(code, file + ":" + std::to_string(pos.line) + ":" + std::to_string(pos.col) + ": " + message),
      file_(std::move(file)), pos_(pos), detail_(message) {}

SkillFile parse_skill_file(const SourceText& src) {
    Parser p(src, Lexer(src).run());
    return p.file();
}

SkillFile parse_skill_file(std::string_view text, std::string name) {
    return parse_skill_file(SourceText(std::move(name), text));
}

std::vector<Statement> parse_statements(std::string_view text) {
    SourceText src("<statement>", text);
    Parser p(src, Lexer(src).run());
    return p.statement_list();
}

Statement parse_statement(std::string_view text) {
    auto list = parse_statements(text);
    if (list.size() != 1)
        throw ParseError(ErrorCode::SyntaxError, "<statement>", {1, 1},
                         "expected exactly one statement, found " + std::to_string(list.size()));
    return std::move(list.front());
}

std::string print(const Value& value) {
    switch (value.kind) {
    case ValueKind::Selector: return "#" + value.text;
    case ValueKind::Integer: return std::to_string(value.integer);
    case ValueKind::Text: return quote(value.text);
    }
    return {};
}

std::string print(const Expr& expr) {
    if (expr.is_param()) return expr.param().name;
    return print(expr.value());
}

std::string print(const PrimitiveAction& action) {
    std::string out(to_string(action.kind));
    out += "(";
    for (std::size_t i = 0; i < action.args.size(); ++i) {
        if (i) out += ", ";
        out += print(action.args[i]);
    }
    return out + ")";
}

std::string print(const Statement& stmt) {
    if (stmt.is_stop()) return "stop";
    if (stmt.is_call()) {
        const auto& c = stmt.as_call();
        return "call " + c.target + print_args(c.args);
    }
    const auto& p = stmt.as_prim();
    return std::string(to_string(p.kind)) + print_args(p.args);
}

std::string print(const SkillSignature& sig) {
    std::string out = sig.name + print_params(sig.params);
    if (!sig.doc.empty()) out += " " + quote(sig.doc);
    return out;
}

std::string print(const CategoryInterface& iface) {
    std::ostringstream os;
    os << "interface " << iface.id << " category " << iface.category << " {\n";
    for (const auto& sig : iface.abstract_signatures) os << "  abstract " << print(sig) << "\n";
    for (const auto& def : iface.default_methods) print_skill(os, def, "default ");
    os << "}\n";
    return os.str();
}

std::string print(const SiteImplementation& impl) {
    std::ostringstream os;
    os << "implementation " << impl.id << " implements " << impl.implements << " site " << impl.site << " at "
       << impl.created_at << " {\n";
    for (const auto& def : impl.methods) {
        std::string prefix = def.origin == SkillOrigin::Induced ? "induced " : "handwritten ";
        print_skill(os, def, prefix);
    }
    os << "}\n";
    return os.str();
}

std::string print(const SkillFile& file) {
    return std::visit([](const auto& f) { return print(f); }, file);
}

std::optional<PrimitiveAction> ground(const PrimStmt& stmt) {
    PrimitiveAction out;
    out.kind = stmt.kind;
    for (const auto& a : stmt.args) {
        if (a.is_param()) return std::nullopt;
        out.args.push_back(a.value());
    }
    return out;
}

} // namespace webskill

#pragma once

// Skill DSL: the primitive action space, skill bodies, interface and
// implementation files. Grammar lives in docs/skill-grammar.md.

#include "webskill/error.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace webskill {

enum class PrimitiveKind {
    Noop,
    Click,
    Hover,
    Type,
    Press,
    Scroll,
    TabFocus,
    NewTab,
    TabClose,
    GoBack,
    GoForward,
    Goto,
};

inline constexpr int kPrimitiveKindCount = 12;

enum class ValueKind { Text, Integer, Selector };
using ParamKind = ValueKind;

std::string_view to_string(PrimitiveKind kind);
std::string_view to_string(ValueKind kind);
std::optional<PrimitiveKind> primitive_from_name(std::string_view name);
std::optional<ValueKind> value_kind_from_name(std::string_view name);

/// Argument kinds a primitive expects, in order.
std::span<const ValueKind> primitive_arg_kinds(PrimitiveKind kind);

/// A ground argument. Selectors hold the element id without the leading '#'.
struct Value {
    ValueKind kind = ValueKind::Text;
    std::string text;
    std::int64_t integer = 0;

    static Value make_text(std::string s) { return {ValueKind::Text, std::move(s), 0}; }
    static Value make_selector(std::string id) { return {ValueKind::Selector, std::move(id), 0}; }
    static Value make_integer(std::int64_t v) { return {ValueKind::Integer, {}, v}; }

    bool operator==(const Value&) const = default;
};

struct ParamRef {
    std::string name;
    bool operator==(const ParamRef&) const = default;
};

/// A literal or a reference to an enclosing skill parameter.
struct Expr {
    std::variant<Value, ParamRef> node;

    bool is_param() const { return std::holds_alternative<ParamRef>(node); }
    const Value& value() const { return std::get<Value>(node); }
    const ParamRef& param() const { return std::get<ParamRef>(node); }

    bool operator==(const Expr&) const = default;
};

/// A fully ground primitive, the unit the simulator executes.
struct PrimitiveAction {
    PrimitiveKind kind = PrimitiveKind::Noop;
    std::vector<Value> args;

    bool operator==(const PrimitiveAction&) const = default;

    static PrimitiveAction noop() { return {PrimitiveKind::Noop, {}}; }
    static PrimitiveAction click(std::string id) { return {PrimitiveKind::Click, {Value::make_selector(std::move(id))}}; }
    static PrimitiveAction hover(std::string id) { return {PrimitiveKind::Hover, {Value::make_selector(std::move(id))}}; }
    static PrimitiveAction type(std::string id, std::string text) {
        return {PrimitiveKind::Type, {Value::make_selector(std::move(id)), Value::make_text(std::move(text))}};
    }
    static PrimitiveAction press(std::string key) { return {PrimitiveKind::Press, {Value::make_text(std::move(key))}}; }
};

struct PrimStmt {
    PrimitiveKind kind = PrimitiveKind::Noop;
    std::vector<Expr> args;
    bool operator==(const PrimStmt&) const = default;
};

struct CallStmt {
    std::string target;
    std::vector<Expr> args;
    bool operator==(const CallStmt&) const = default;
};

struct StopStmt {
    bool operator==(const StopStmt&) const = default;
};

struct SourcePos {
    int line = 0;
    int col = 0;
};

struct Statement {
    std::variant<PrimStmt, CallStmt, StopStmt> node;
    SourcePos pos;

    static Statement prim(PrimitiveAction action);
    static Statement call(std::string target, std::vector<Expr> args = {});
    static Statement stop() { return Statement{StopStmt{}, {}}; }

    bool is_prim() const { return std::holds_alternative<PrimStmt>(node); }
    bool is_call() const { return std::holds_alternative<CallStmt>(node); }
    bool is_stop() const { return std::holds_alternative<StopStmt>(node); }
    const PrimStmt& as_prim() const { return std::get<PrimStmt>(node); }
    const CallStmt& as_call() const { return std::get<CallStmt>(node); }

    // Positions are diagnostics only; they never take part in AST identity.
    bool operator==(const Statement& other) const { return node == other.node; }
};

struct Param {
    std::string name;
    ParamKind kind = ParamKind::Text;
    bool operator==(const Param&) const = default;
};

struct SkillSignature {
    std::string name;
    std::vector<Param> params;
    std::string doc;
    bool operator==(const SkillSignature&) const = default;
};

enum class SkillOrigin { HandWritten, Induced, Default };
std::string_view to_string(SkillOrigin origin);

struct SkillDef {
    SkillSignature signature;
    std::vector<Statement> body;
    SkillOrigin origin = SkillOrigin::HandWritten;
    int created_at = 0;

    const std::string& name() const { return signature.name; }
    bool operator==(const SkillDef&) const = default;
};

struct CategoryInterface {
    std::string id;
    std::string category;
    std::vector<SkillSignature> abstract_signatures;
    std::vector<SkillDef> default_methods;

    const SkillSignature* find_signature(std::string_view name) const;
    const SkillDef* find_default(std::string_view name) const;
    bool operator==(const CategoryInterface&) const = default;
};

struct SiteImplementation {
    std::string id;
    std::string implements;
    std::string site;
    std::vector<SkillDef> methods;  // declaration order
    int created_at = 0;

    const SkillDef* find_method(std::string_view name) const;
    bool operator==(const SiteImplementation&) const = default;
};

using SkillFile = std::variant<CategoryInterface, SiteImplementation>;

/// Raw `.skill` text: CRLF/CR normalized to LF, checked to be valid UTF-8.
class SourceText {
public:
    SourceText(std::string name, std::string_view raw);

    const std::string& name() const { return name_; }
    const std::string& text() const { return text_; }
    /// 1-based line/column of a byte offset.
    SourcePos position_of(std::size_t offset) const;

private:
    std::string name_;
    std::string text_;
    std::vector<std::size_t> line_starts_;
};

/// Parse diagnostics render as `file:line:col: message`.
class ParseError : public Error {
public:
    ParseError(ErrorCode code, std::string file, SourcePos pos, const std::string& message);

    const std::string& file() const { return file_; }
    SourcePos pos() const { return pos_; }
    const std::string& detail() const { return detail_; }

private:
    std::string file_;
    SourcePos pos_;
    std::string detail_;
};

SkillFile parse_skill_file(const SourceText& src);
SkillFile parse_skill_file(std::string_view text, std::string name = "<input>");

/// One statement, as emitted by a policy. Accepts `CALL` in any case.
Statement parse_statement(std::string_view text);
std::vector<Statement> parse_statements(std::string_view text);

std::string print(const Value& value);
std::string print(const Expr& expr);
std::string print(const PrimitiveAction& action);
std::string print(const Statement& stmt);
std::string print(const SkillSignature& sig);
std::string print(const CategoryInterface& iface);
std::string print(const SiteImplementation& impl);
std::string print(const SkillFile& file);

/// Ground a primitive statement that carries only literals.
std::optional<PrimitiveAction> ground(const PrimStmt& stmt);

} // namespace webskill

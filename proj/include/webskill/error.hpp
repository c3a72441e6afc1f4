#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace webskill {

enum class ErrorCode {
    // action_dsl
    SyntaxError,
    UnknownPrimitive,
    ArityError,
    ArgumentKind,
    UnboundParam,
    // skill_model
    DuplicateCategory,
    CyclicDefaultMethods,
    UnresolvedCall,
    UnknownInterface,
    ConformanceViolation,
    DuplicateSite,
    DuplicateSkill,
    OrderingViolation,
    CyclicReference,
    UnknownSkill,
    UnimplementedAbstractCall,
    // web_sim
    UnknownCategory,
    SiteTaskMismatch,
    MalformedAction,
    UnknownPredicate,
    // agent_runtime
    PolicyFault,
    MissingScript,
    Transport,
    MalformedReply,
    // induction
    InducerFault,
    ValidationFailed,
    ProposerFault,
    // metrics
    EmptyTaskSet,
    EmptyLibrary,
    EmptySet,
    NegativeGamma,
    // harness / io
    SchemaMismatch,
    Config,
    Io,
    MissingArtifact,
};

std::string_view to_string(ErrorCode code);

/// Every failure the library reports is an Error carrying one ErrorCode.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace webskill

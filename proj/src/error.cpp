#include "webskill/error.hpp"

namespace webskill {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownPrimitive: return "UnknownPrimitive";
    case ErrorCode::ArityError: return "ArityError";
    case ErrorCode::ArgumentKind: return "ArgumentKind";
    case ErrorCode::UnboundParam: return "UnboundParam";
    case ErrorCode::DuplicateCategory: return "DuplicateCategory";
    case ErrorCode::CyclicDefaultMethods: return "CyclicDefaultMethods";
    case ErrorCode::UnresolvedCall: return "UnresolvedCall";
    case ErrorCode::UnknownInterface: return "UnknownInterface";
    case ErrorCode::ConformanceViolation: return "ConformanceViolation";
    case ErrorCode::DuplicateSite: return "DuplicateSite";
    case ErrorCode::DuplicateSkill: return "DuplicateSkill";
    case ErrorCode::OrderingViolation: return "OrderingViolation";
    case ErrorCode::CyclicReference: return "CyclicReference";
    case ErrorCode::UnknownSkill: return "UnknownSkill";
    case ErrorCode::UnimplementedAbstractCall: return "UnimplementedAbstractCall";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::SiteTaskMismatch: return "SiteTaskMismatch";
    case ErrorCode::MalformedAction: return "MalformedAction";
    case ErrorCode::UnknownPredicate: return "UnknownPredicate";
    case ErrorCode::PolicyFault: return "PolicyFault";
    case ErrorCode::MissingScript: return "MissingScript";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::MalformedReply: return "MalformedReply";
    case ErrorCode::InducerFault: return "InducerFault";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::ProposerFault: return "ProposerFault";
    case ErrorCode::EmptyTaskSet: return "EmptyTaskSet";
    case ErrorCode::EmptyLibrary: return "EmptyLibrary";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::NegativeGamma: return "NegativeGamma";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    }
    return "Unknown";
}

} // namespace webskill

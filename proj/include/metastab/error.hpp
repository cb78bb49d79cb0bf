#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace metastab {

enum class Errc {
    DuplicateLabel,
    InvalidTransition,
    NonPositiveRate,
    NotIrreducible,
    TooSmall,
    SolverFailure,
    DimensionMismatch,
    NotReversible,
    StateNotFound,
    EmptySubset,
    StartOutsideSubset,
    OverlappingSets,
    StateInTargetSet,
    NotMeanZero,
    ODEStepFailure,
    NotBirthDeath,
    PartitionInvalid,
    GridTooSmall,
    MissingGateState,
    NegativeRate,
    StateSpaceTooLarge,
    SpecInvalid,
    OverlappingNeighborhoods,
    HVanishesOffZeros,
    QuadratureFailure,
    KappaNotTwo,
    InvalidHorizon,
    StartOutsideWells,
    InsufficientData,
    ConfigInvalid,
    ParseError,
};

inline std::string_view to_string(Errc code) {
    switch (code) {
        case Errc::DuplicateLabel: return "DuplicateLabel";
        case Errc::InvalidTransition: return "InvalidTransition";
        case Errc::NonPositiveRate: return "NonPositiveRate";
        case Errc::NotIrreducible: return "NotIrreducible";
        case Errc::TooSmall: return "TooSmall";
        case Errc::SolverFailure: return "SolverFailure";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::NotReversible: return "NotReversible";
        case Errc::StateNotFound: return "StateNotFound";
        case Errc::EmptySubset: return "EmptySubset";
        case Errc::StartOutsideSubset: return "StartOutsideSubset";
        case Errc::OverlappingSets: return "OverlappingSets";
        case Errc::StateInTargetSet: return "StateInTargetSet";
        case Errc::NotMeanZero: return "NotMeanZero";
        case Errc::ODEStepFailure: return "ODEStepFailure";
        case Errc::NotBirthDeath: return "NotBirthDeath";
        case Errc::PartitionInvalid: return "PartitionInvalid";
        case Errc::GridTooSmall: return "GridTooSmall";
        case Errc::MissingGateState: return "MissingGateState";
        case Errc::NegativeRate: return "NegativeRate";
        case Errc::StateSpaceTooLarge: return "StateSpaceTooLarge";
        case Errc::SpecInvalid: return "SpecInvalid";
        case Errc::OverlappingNeighborhoods: return "OverlappingNeighborhoods";
        case Errc::HVanishesOffZeros: return "HVanishesOffZeros";
        case Errc::QuadratureFailure: return "QuadratureFailure";
        case Errc::KappaNotTwo: return "KappaNotTwo";
        case Errc::InvalidHorizon: return "InvalidHorizon";
        case Errc::StartOutsideWells: return "StartOutsideWells";
        case Errc::InsufficientData: return "InsufficientData";
        case Errc::ConfigInvalid: return "ConfigInvalid";
        case Errc::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace metastab

#pragma once

#include <stdexcept>
#include <string>

namespace cangat {

// Typed error codes surfaced by every module. The CLI maps categories to
// process exit codes (usage=2, data=3, model=4).
enum class Errc {
    // ingestion / trace data
    MalformedLine,
    IdOutOfRange,
    DlcMismatch,
    BadByte,
    OddHexLength,
    NonMonotonicTimestamp,
    IoError,
    UnsupportedFormat,
    // synthesis
    EmptyProfileSet,
    WindowOutOfRange,
    ReplaySourceEmpty,
    // graph construction
    WindowTooSmall,
    EmptyTrace,
    IdNotInWindow,
    // tensor / autodiff
    ShapeMismatch,
    InvalidAxis,
    NonFiniteValue,
    NonScalarLoss,
    // layers / losses
    NonPositiveTemperature,
    InvalidLabel,
    ProbabilityOutOfRange,
    EmptyLayerList,
    EmptyGraph,
    EdgeIndexOutOfRange,
    // models / training
    InvalidArch,
    SingleClassDataset,
    EmptyDataset,
    VersionMismatch,
    CorruptCheckpoint,
    ArchMismatch,
    // evaluation
    LengthMismatch,
    EmptyCounts,
    // configuration / CLI
    ConfigError,
};

const char* errc_name(Errc c);

// Broad category used for CLI exit codes.
enum class ErrClass { Usage, Data, Model };
ErrClass errc_class(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) {
    throw Error(code, msg);
}

} // namespace cangat

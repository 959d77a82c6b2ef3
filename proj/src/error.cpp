#include "cangat/error.hpp"

namespace cangat {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::MalformedLine: return "MalformedLine";
        case Errc::IdOutOfRange: return "IdOutOfRange";
        case Errc::DlcMismatch: return "DlcMismatch";
        case Errc::BadByte: return "BadByte";
        case Errc::OddHexLength: return "OddHexLength";
        case Errc::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
        case Errc::IoError: return "IoError";
        case Errc::UnsupportedFormat: return "UnsupportedFormat";
        case Errc::EmptyProfileSet: return "EmptyProfileSet";
        case Errc::WindowOutOfRange: return "WindowOutOfRange";
        case Errc::ReplaySourceEmpty: return "ReplaySourceEmpty";
        case Errc::WindowTooSmall: return "WindowTooSmall";
        case Errc::EmptyTrace: return "EmptyTrace";
        case Errc::IdNotInWindow: return "IdNotInWindow";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::InvalidAxis: return "InvalidAxis";
        case Errc::NonFiniteValue: return "NonFiniteValue";
        case Errc::NonScalarLoss: return "NonScalarLoss";
        case Errc::NonPositiveTemperature: return "NonPositiveTemperature";
        case Errc::InvalidLabel: return "InvalidLabel";
        case Errc::ProbabilityOutOfRange: return "ProbabilityOutOfRange";
        case Errc::EmptyLayerList: return "EmptyLayerList";
        case Errc::EmptyGraph: return "EmptyGraph";
        case Errc::EdgeIndexOutOfRange: return "EdgeIndexOutOfRange";
        case Errc::InvalidArch: return "InvalidArch";
        case Errc::SingleClassDataset: return "SingleClassDataset";
        case Errc::EmptyDataset: return "EmptyDataset";
        case Errc::VersionMismatch: return "VersionMismatch";
        case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
        case Errc::ArchMismatch: return "ArchMismatch";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::EmptyCounts: return "EmptyCounts";
        case Errc::ConfigError: return "ConfigError";
    }
    return "UnknownError";
}

ErrClass errc_class(Errc c) {
    switch (c) {
        case Errc::ConfigError:
        case Errc::UnsupportedFormat:
            return ErrClass::Usage;
        case Errc::ShapeMismatch:
        case Errc::InvalidAxis:
        case Errc::NonFiniteValue:
        case Errc::NonScalarLoss:
        case Errc::NonPositiveTemperature:
        case Errc::InvalidLabel:
        case Errc::ProbabilityOutOfRange:
        case Errc::EmptyLayerList:
        case Errc::EmptyGraph:
        case Errc::EdgeIndexOutOfRange:
        case Errc::InvalidArch:
        case Errc::VersionMismatch:
        case Errc::CorruptCheckpoint:
        case Errc::ArchMismatch:
            return ErrClass::Model;
        default:
            return ErrClass::Data;
    }
}

} // namespace cangat

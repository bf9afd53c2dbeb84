#include "osda/errors.hpp"

namespace osda {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::IoError: return "IoError";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::TrailingBytes: return "TrailingBytes";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::EmptyCluster: return "EmptyCluster";
    case Errc::MissingPartitions: return "MissingPartitions";
    case Errc::AllClassesUndefined: return "AllClassesUndefined";
    case Errc::UndefinedPrototype: return "UndefinedPrototype";
    case Errc::ZeroNormEmbedding: return "ZeroNormEmbedding";
    case Errc::BadShape: return "BadShape";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::NoClosedSamples: return "NoClosedSamples";
    case Errc::EmptySide: return "EmptySide";
    case Errc::MagnitudeOutOfRange: return "MagnitudeOutOfRange";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::ImageTooSmall: return "ImageTooSmall";
    case Errc::DegenerateData: return "DegenerateData";
    case Errc::TooLargeForOracle: return "TooLargeForOracle";
    case Errc::UnknownKey: return "UnknownKey";
    case Errc::BadValue: return "BadValue";
  }
  return "Unknown";
}

}  // namespace osda

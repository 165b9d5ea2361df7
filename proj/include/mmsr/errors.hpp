#pragma once

#include <stdexcept>
#include <string>

namespace mmsr {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& m) : std::runtime_error("shape error: " + m) {}
};
struct ParamError : std::runtime_error {
    explicit ParamError(const std::string& m) : std::runtime_error("parameter error: " + m) {}
};
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& m) : std::runtime_error("format error: " + m) {}
};
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& m) : std::runtime_error("parse error: " + m) {}
};
struct SegmentationError : std::runtime_error {
    explicit SegmentationError(const std::string& m) : std::runtime_error("segmentation failed: " + m) {}
};
struct NormalizationError : std::runtime_error {
    explicit NormalizationError(const std::string& m) : std::runtime_error("normalization error: " + m) {}
};
struct SamplingError : std::runtime_error {
    explicit SamplingError(const std::string& m) : std::runtime_error("sampling error: " + m) {}
};
struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& m) : std::runtime_error("checkpoint error: " + m) {}
};
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& m) : std::runtime_error("training aborted: " + m) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error("i/o error: " + m) {}
};

} // namespace mmsr

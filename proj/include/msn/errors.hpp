#ifndef MSN_ERRORS_HPP
#define MSN_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msn {

/// Vector lengths or tensor shapes disagree.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A caller-supplied argument is outside its documented domain.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Invalid network topology. Carries the index of the offending layer.
struct BuildError : std::invalid_argument {
    BuildError(std::size_t layer, const std::string& what)
        : std::invalid_argument("layer " + std::to_string(layer) + ": " + what), layer_index(layer) {}
    std::size_t layer_index;
};

/// Malformed binary input. Carries the byte offset where parsing stopped.
struct ParseError : std::runtime_error {
    ParseError(std::size_t offset, const std::string& what)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), byte_offset(offset) {}
    std::size_t byte_offset;
};

/// An objective produced a non-finite value, or threw while evaluating.
struct EvaluationError : std::runtime_error {
    EvaluationError(std::size_t slot_index, const std::string& what)
        : std::runtime_error("slot " + std::to_string(slot_index) + ": " + what), slot(slot_index) {}
    std::size_t slot;
    std::size_t generation = 0;
};

}  // namespace msn

#endif  // MSN_ERRORS_HPP

#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace hetrrm {

// Dense index with a tag so node and link ids cannot be mixed up.
template <typename Tag>
struct StrongId {
  std::size_t value = 0;

  constexpr StrongId() = default;
  constexpr explicit StrongId(std::size_t v) : value(v) {}

  constexpr auto operator<=>(const StrongId&) const = default;
};

template <typename Tag>
std::ostream& operator<<(std::ostream& os, StrongId<Tag> id) {
  return os << id.value;
}

struct NodeTag {};
struct LinkTag {};
struct FlowTag {};

using NodeId = StrongId<NodeTag>;
using LinkId = StrongId<LinkTag>;
using FlowId = StrongId<FlowTag>;

// Thrown when an argument falls outside an operation's domain (e.g. asking a
// mobile user for its outgoing links, or a zero-length radio link).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Thrown for malformed or invalid scenario input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hetrrm

template <typename Tag>
struct std::hash<hetrrm::StrongId<Tag>> {
  std::size_t operator()(hetrrm::StrongId<Tag> id) const noexcept {
    return std::hash<std::size_t>{}(id.value);
  }
};

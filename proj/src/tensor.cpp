#include "orl/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace orl {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

void NetParams::add(std::string name, RealArray value) {
  if (contains(name)) throw InvalidArgument("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(value));
}

bool NetParams::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

RealArray& NetParams::at(std::string_view name) {
  for (auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw InvalidArgument("no parameter named '" + std::string(name) + "'");
}

const RealArray& NetParams::at(std::string_view name) const {
  return const_cast<NetParams*>(this)->at(name);
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.second.size());
  return n;
}

bool NetParams::same_layout(const NetParams& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first) return false;
    if (entries_[i].second.shape() != other.entries_[i].second.shape()) return false;
  }
  return true;
}

NetParams NetParams::zeros_like() const {
  NetParams out;
  for (const auto& [name, value] : entries_) out.add(name, RealArray(value.shape()));
  return out;
}

NetParams NetParams::with_prefix_stripped(std::string_view prefix) const {
  NetParams out;
  for (const auto& [name, value] : entries_) {
    if (name.size() > prefix.size() && std::string_view(name).substr(0, prefix.size()) == prefix) {
      out.add(name.substr(prefix.size()), value);
    }
  }
  return out;
}

void NetParams::append_prefixed(std::string_view prefix, const NetParams& other) {
  for (const auto& [name, value] : other) add(std::string(prefix) + name, value);
}

void require_same_layout(const NetParams& a, const NetParams& b, std::string_view context) {
  if (!a.same_layout(b)) {
    throw InvalidArgument(std::string(context) + ": parameter layouts differ");
  }
}

}  // namespace orl

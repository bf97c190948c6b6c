#pragma once

#include <algorithm>
#include <cstddef>
#include <random>
#include <vector>

#include "sagin/scenario.hpp"

namespace sagin {

// Fixed-capacity FIFO ring. Once full, each push overwrites the oldest item.
template <class T>
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 4096));
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  std::uint64_t total_pushed() const { return pushed_; }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[cursor_] = std::move(item);
    }
    cursor_ = (cursor_ + 1) % capacity_;
    ++pushed_;
  }

  // i = 0 is the oldest stored item.
  const T& at(std::size_t i) const {
    if (items_.size() < capacity_) return items_[i];
    return items_[(cursor_ + i) % capacity_];
  }

  std::vector<T> ordered() const {
    std::vector<T> out;
    out.reserve(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) out.push_back(at(i));
    return out;
  }

  // Uniform sample of n distinct stored items (Floyd's algorithm).
  std::vector<T> sample(std::size_t n, Rng& rng) const {
    if (n > items_.size()) throw DomainError("replay buffer: sample larger than contents");
    const std::size_t m = items_.size();
    std::vector<std::size_t> picked;
    picked.reserve(n);
    for (std::size_t j = m - n; j < m; ++j) {
      const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
      if (std::find(picked.begin(), picked.end(), t) == picked.end()) {
        picked.push_back(t);
      } else {
        picked.push_back(j);
      }
    }
    std::vector<T> out;
    out.reserve(n);
    for (std::size_t idx : picked) out.push_back(items_[idx]);
    return out;
  }

  // Serialisation of the raw ring; `write_item` / `read_item` handle T.
  template <class Writer, class WriteItem>
  void save(Writer& w, WriteItem write_item) const {
    w.u64(capacity_);
    w.u64(cursor_);
    w.u64(pushed_);
    w.u64(items_.size());
    for (const T& t : items_) write_item(w, t);
  }

  template <class Reader, class ReadItem>
  static ReplayBuffer load(Reader& r, ReadItem read_item) {
    ReplayBuffer b;
    b.capacity_ = r.u64();
    b.cursor_ = r.u64();
    b.pushed_ = r.u64();
    const auto n = r.u64();
    if (b.capacity_ == 0 || n > b.capacity_ || b.cursor_ >= b.capacity_)
      throw CheckpointError("replay buffer: inconsistent header");
    b.items_.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) b.items_.push_back(read_item(r));
    return b;
  }

 private:
  std::size_t capacity_ = 1;
  std::size_t cursor_ = 0;
  std::uint64_t pushed_ = 0;
  std::vector<T> items_;
};

}  // namespace sagin

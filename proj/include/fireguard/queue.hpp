#pragma once

#include <cstddef>
#include <deque>
#include <optional>

#include "fireguard/filter.hpp"

namespace fg {

template <class T>
class BoundedQueue {
 public:
  explicit BoundedQueue(size_t capacity = 32) : capacity_(capacity) {}

  bool push(T v) {
    if (full()) return false;
    items_.push_back(std::move(v));
    return true;
  }
  T pop() {
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }
  const T& front() const { return items_.front(); }
  const T& at(size_t i) const { return items_[i]; }

  size_t size() const { return items_.size(); }
  size_t capacity() const { return capacity_; }
  size_t space() const { return capacity_ - items_.size(); }
  bool empty() const { return items_.empty(); }
  bool full() const { return items_.size() >= capacity_; }

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  size_t capacity_;
  std::deque<T> items_;
};

/// A filtered packet as it sits in an engine's input queue, tagged with the
/// kernel context that should consume it.
struct QueueEntry {
  Packet packet;
  unsigned kernel = 0;
};

}  // namespace fg

#pragma once

// FIFO experience replay with seeded without-replacement batch sampling.

#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include "kgrl/error.hpp"

namespace kgrl::rl {

struct Transition {
  int user = -1;
  std::vector<int> items_before;
  std::vector<int> items_after;
  std::vector<double> action;
  double reward = 0.0;
  bool terminal = false;
  int target = -1;  // teacher item the reward was measured against
};

class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, unsigned long long seed) : capacity_(capacity), rng_(seed) {
    if (capacity_ == 0) throw ConfigError("replay buffer capacity must be >= 1");
    ring_.reserve(capacity_);
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return ring_.size(); }

  void push(Transition tr) {
    if (ring_.size() < capacity_) {
      ring_.push_back(std::move(tr));
    } else {
      ring_[head_] = std::move(tr);  // overwrite the oldest slot
      head_ = (head_ + 1) % capacity_;
    }
  }

  // logical index 0 = oldest surviving transition
  const Transition& at(std::size_t i) const {
    if (i >= ring_.size()) throw std::out_of_range("replay buffer index");
    return ring_[(head_ + i) % ring_.size()];
  }

  // n distinct transitions, order given by a partial Fisher-Yates shuffle
  std::vector<const Transition*> sample(std::size_t n) {
    if (n == 0) throw std::invalid_argument("cannot sample an empty batch");
    if (n > ring_.size()) throw std::logic_error("batch larger than buffer contents");
    std::vector<std::size_t> idx(ring_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<const Transition*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng_)]);
      out.push_back(&ring_[idx[i]]);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest slot once the ring is full
  std::vector<Transition> ring_;
  std::mt19937_64 rng_;
};

}  // namespace kgrl::rl

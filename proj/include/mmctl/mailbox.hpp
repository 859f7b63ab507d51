// Copyright 2026 The mmctl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Wait-free exchange primitives between the tick thread and its peers.
#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <optional>

namespace mmctl {

// Bounded single-producer single-consumer ring. push and pop are wait-free;
// each side must stay on one thread at a time.
template <typename T, std::size_t Capacity>
class SpscRing {
  static_assert(Capacity >= 2 && (Capacity & (Capacity - 1)) == 0, "capacity must be a power of two");

 public:
  // False when full.
  bool push(const T& v) {
    const std::size_t head = head_.load(std::memory_order_relaxed);
    const std::size_t tail = tail_.load(std::memory_order_acquire);
    if (head - tail == Capacity) return false;
    buf_[head & (Capacity - 1)] = v;
    head_.store(head + 1, std::memory_order_release);
    return true;
  }

  // Oldest element without removing it.
  const T* peek() const {
    const std::size_t tail = tail_.load(std::memory_order_relaxed);
    if (head_.load(std::memory_order_acquire) == tail) return nullptr;
    return &buf_[tail & (Capacity - 1)];
  }

  std::optional<T> pop() {
    const std::size_t tail = tail_.load(std::memory_order_relaxed);
    if (head_.load(std::memory_order_acquire) == tail) return std::nullopt;
    T v = buf_[tail & (Capacity - 1)];
    tail_.store(tail + 1, std::memory_order_release);
    return v;
  }

  bool empty() const {
    return head_.load(std::memory_order_acquire) == tail_.load(std::memory_order_acquire);
  }

 private:
  std::array<T, Capacity> buf_{};
  alignas(64) std::atomic<std::size_t> head_{0};
  alignas(64) std::atomic<std::size_t> tail_{0};
};

// Latest-value slot for one writer and one reader. Three copies rotate so
// that neither side waits: the writer fills its back copy and swaps it with
// the middle one; the reader swaps the middle one in when it is fresh.
// Copies are assigned, so preallocated members are reused.
template <typename T>
class TripleBuffer {
 public:
  TripleBuffer() = default;
  explicit TripleBuffer(const T& init) : buf_{init, init, init} {}

  T& back() { return buf_[back_]; }
  void publish() {
    back_ = middle_.exchange(back_ | kFresh, std::memory_order_acq_rel) & kIndex;
  }

  // Swaps in the newest published value if there is one; false otherwise.
  bool update() {
    if ((middle_.load(std::memory_order_acquire) & kFresh) == 0) return false;
    front_ = middle_.exchange(front_, std::memory_order_acq_rel) & kIndex;
    return true;
  }
  const T& front() const { return buf_[front_]; }

 private:
  static constexpr unsigned kIndex = 3u;
  static constexpr unsigned kFresh = 4u;
  std::array<T, 3> buf_{};
  unsigned back_ = 0;
  alignas(64) std::atomic<unsigned> middle_{1};
  unsigned front_ = 2;
};

}  // namespace mmctl

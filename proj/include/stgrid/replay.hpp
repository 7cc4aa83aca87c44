#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stgrid/autoencoder.hpp"
#include "stgrid/errors.hpp"
#include "stgrid/maps.hpp"
#include "stgrid/rng.hpp"

namespace stgrid {

// Fixed-capacity FIFO ring. Index 0 is the oldest retained element.
template <typename T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigurationError("RingBuffer capacity must be positive");
    items_.reserve(capacity);
  }

  void push(T item) {
    ++pushed_;
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  std::size_t total_pushed() const { return pushed_; }

  const T& operator[](std::size_t age_index) const {
    if (age_index >= items_.size()) throw DomainError("RingBuffer index out of range");
    return items_[(head_ + age_index) % items_.size()];
  }

  // Uniform index over filled slots.
  std::size_t sample_index(Engine& rng) const {
    if (items_.empty()) throw DomainError("cannot sample an empty buffer");
    return static_cast<std::size_t>(uniform_index(rng, items_.size()));
  }

  void clear() {
    items_.clear();
    head_ = 0;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::size_t pushed_ = 0;
  std::vector<T> items_;
};

// One slow-time step as stored for system identification.
struct TrajectoryStep {
  ObservationMap y;
  int action = 0;
};

// Rolling memory of (y_k, a_k) steps. A sampled record is a window of
// consecutive steps, drawn uniformly among windows lying in filled slots.
class TrajectoryBuffer {
 public:
  TrajectoryBuffer(std::size_t capacity, std::size_t predictions)
      : steps_(capacity), predictions_(predictions) {
    if (predictions == 0) throw ConfigurationError("trajectory length K must be positive");
    if (capacity < predictions + 1)
      throw ConfigurationError("trajectory buffer smaller than one record");
  }

  void push(ObservationMap y, int action) { steps_.push({std::move(y), action}); }

  std::size_t size() const { return steps_.size(); }
  std::size_t capacity() const { return steps_.capacity(); }
  std::size_t predictions() const { return predictions_; }
  const TrajectoryStep& step(std::size_t age_index) const { return steps_[age_index]; }

  std::size_t window_count() const {
    return steps_.size() > predictions_ ? steps_.size() - predictions_ : 0;
  }

  TrajectoryRecord window(std::size_t start) const {
    TrajectoryRecord r;
    r.observations.reserve(predictions_ + 1);
    r.actions.reserve(predictions_ + 1);
    for (std::size_t k = 0; k <= predictions_; ++k) {
      const TrajectoryStep& s = steps_[start + k];
      r.observations.push_back(s.y);
      r.actions.push_back(s.action);
    }
    return r;
  }

  std::size_t sample_start(Engine& rng) const {
    const std::size_t n = window_count();
    if (n == 0) throw DomainError("trajectory buffer holds no complete record yet");
    return static_cast<std::size_t>(uniform_index(rng, n));
  }

  std::vector<TrajectoryRecord> sample(std::size_t count, Engine& rng) const {
    std::vector<TrajectoryRecord> batch;
    batch.reserve(count);
    for (std::size_t b = 0; b < count; ++b) batch.push_back(window(sample_start(rng)));
    return batch;
  }

 private:
  RingBuffer<TrajectoryStep> steps_;
  std::size_t predictions_;
};

}  // namespace stgrid

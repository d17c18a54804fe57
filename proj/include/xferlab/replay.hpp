#pragma once

#include <cstddef>
#include <vector>

#include "autodiff.hpp"
#include "common.hpp"
#include "rng.hpp"

namespace xferlab {

/// Fixed-capacity ring buffer of transitions with flat contiguous storage.
/// `done` records environment termination only; horizon truncation is stored
/// as done = false so bootstrapping continues across the cut.
class ReplayBuffer {
  public:
    ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
        : capacity_(capacity),
          state_dim_(state_dim),
          action_dim_(action_dim),
          s_(capacity * state_dim),
          a_(capacity * action_dim),
          s2_(capacity * state_dim),
          r_(capacity),
          done_(capacity) {
        require(capacity > 0, ErrorCode::Precondition, "replay capacity must be positive");
    }

    void push(const std::vector<double>& s, const std::vector<double>& a,
              const std::vector<double>& s2, double r, bool done) {
        require(s.size() == state_dim_ && s2.size() == state_dim_ && a.size() == action_dim_,
                ErrorCode::ShapeMismatch, "transition dims");
        require(std::isfinite(r) && all_finite(s) && all_finite(a) && all_finite(s2),
                ErrorCode::NumericNan, "non-finite transition");
        std::copy(s.begin(), s.end(), s_.begin() + long(head_ * state_dim_));
        std::copy(a.begin(), a.end(), a_.begin() + long(head_ * action_dim_));
        std::copy(s2.begin(), s2.end(), s2_.begin() + long(head_ * state_dim_));
        r_[head_] = r;
        done_[head_] = done ? 1 : 0;
        head_ = (head_ + 1) % capacity_;
        if (size_ < capacity_) ++size_;
    }

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }

    struct Batch {
        Mat s, a, s2;
        std::vector<double> r;
        std::vector<unsigned char> done;
    };

    /// Uniform sample with replacement; index draws consume exactly
    /// batch_size values from the given stream.
    Batch sample(std::size_t batch_size, Rng& rng) const {
        require(size_ > 0, ErrorCode::Precondition, "sampling from an empty buffer");
        Batch b;
        b.s = Mat(batch_size, state_dim_);
        b.a = Mat(batch_size, action_dim_);
        b.s2 = Mat(batch_size, state_dim_);
        b.r.resize(batch_size);
        b.done.resize(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) {
            std::size_t k = rng.index(size_);
            std::copy_n(s_.begin() + long(k * state_dim_), state_dim_,
                        b.s.data.begin() + long(i * state_dim_));
            std::copy_n(a_.begin() + long(k * action_dim_), action_dim_,
                        b.a.data.begin() + long(i * action_dim_));
            std::copy_n(s2_.begin() + long(k * state_dim_), state_dim_,
                        b.s2.data.begin() + long(i * state_dim_));
            b.r[i] = r_[k];
            b.done[i] = done_[k];
        }
        return b;
    }

  private:
    std::size_t capacity_, state_dim_, action_dim_;
    std::vector<double> s_, a_, s2_, r_;
    std::vector<unsigned char> done_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

}  // namespace xferlab

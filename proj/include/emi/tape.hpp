#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "emi/tensor.hpp"

namespace emi {

/// Records backward rules of operations in forward order.
///
/// One tape belongs to one thread. An op records a rule only when the tape
/// is recording and at least one of its inputs requires a gradient, so an
/// inference tape never grows.
template <typename Scalar>
class Tape {
 public:
  enum class Mode { record, inference };

  explicit Tape(Mode mode = Mode::record) : mode_(mode) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return mode_ == Mode::record; }

  template <typename... Ts>
  bool should_record(const Ts&... inputs) const {
    return recording() && (inputs.requires_grad() || ...);
  }

  void push(std::function<void()> rule) { rules_.push_back(std::move(rule)); }

  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }
  void clear() { rules_.clear(); }

  /// Seeds d(loss)/d(loss) = 1, replays rules in reverse and clears the tape.
  void backward(const Tensor<Scalar>& loss) {
    if (loss.size() != 1) {
      throw ContractError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
    }
    if (rules_.empty()) {
      throw ContractError("backward() on an empty tape; run a forward pass first");
    }
    if (!loss.requires_grad()) {
      throw ContractError("backward() on a loss that does not depend on any parameter");
    }
    loss.accumulate_grad(Matrix<Scalar>::Ones(1, 1));
    for (auto it = rules_.rbegin(); it != rules_.rend(); ++it) (*it)();
    rules_.clear();
  }

 private:
  Mode mode_;
  std::vector<std::function<void()>> rules_;
};

}  // namespace emi

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mapcx {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when the training loss stops being finite.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t hidden_nodes)
      : Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) +
              " (hidden_nodes=" + std::to_string(hidden_nodes) + ")"),
        epoch_(epoch),
        hidden_nodes_(hidden_nodes) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t hidden_nodes() const noexcept { return hidden_nodes_; }

 private:
  std::size_t epoch_;
  std::size_t hidden_nodes_;
};

}  // namespace mapcx

#pragma once

#include <cstddef>
#include <vector>

namespace ltpnet {

/// Searchable model hyperparameters.
struct HyperparamPoint {
  std::size_t lstm_hidden = 128;
  double lstm_learning_rate = 0.001;
  std::size_t transformer_layers = 6;
  std::size_t attention_heads = 8;
  std::size_t d_model = 256;
  double transformer_learning_rate = 0.0001;

  friend bool operator==(const HyperparamPoint&, const HyperparamPoint&) = default;
};

/// Values used when no search runs: 128 LSTM units at lr 0.001, six encoder
/// layers with eight heads and 256 hidden units at lr 0.0001.
inline constexpr HyperparamPoint kDefaultHyperparams{};

struct IntRange {
  std::size_t min = 0;
  std::size_t max = 0;
};

struct RealRange {
  double min = 0.0;
  double max = 0.0;
};

struct SearchRanges {
  IntRange lstm_hidden{16, 256};
  RealRange lstm_learning_rate{1e-4, 1e-2};
  IntRange transformer_layers{1, 8};
  std::vector<std::size_t> attention_heads{2, 4, 8, 16};
  std::vector<std::size_t> d_model{64, 128, 256};
  RealRange transformer_learning_rate{1e-5, 1e-3};

  void validate() const;
};

}  // namespace ltpnet

#pragma once

#include <array>
#include <span>
#include <vector>

#include "rpsim/types.hpp"

namespace rpsim {

// The four radical-pair spin levels.  Together with the product state P they
// span the chemical-system space.
enum class Channel : int { S = 0, T0 = 1, Tp = 2, Tm = 3 };

inline const char* to_string(Channel c) {
  switch (c) {
    case Channel::S: return "S";
    case Channel::T0: return "T0";
    case Channel::Tp: return "T+";
    case Channel::Tm: return "T-";
  }
  return "?";
}

// Whether reaction/encounter parameters distinguish all four spin levels or
// treat the triplet manifold as one.
enum class SymmetryMode {
  General,
  TripletSymmetric,
  TripletSymmetricNoTDephasing,
};

inline const char* to_string(SymmetryMode m) {
  switch (m) {
    case SymmetryMode::General: return "general";
    case SymmetryMode::TripletSymmetric: return "triplet";
    case SymmetryMode::TripletSymmetricNoTDephasing: return "triplet_nodeph";
  }
  return "?";
}

// Tensor-product layout of the chemical-system Hilbert space.
//
// Basis ordering is fixed: the electron/product block index varies slowest
// (S, T0, T+, T-, P), the nuclear indices fastest (nuclei in listed order,
// last nucleus fastest).  All CSV output depends on this ordering.
//
// The optional st0_only flag drops the T+/T- rows, reducing the electron
// sector to an S-T0 qubit (high-field layout).  No validity threshold is
// claimed for that reduction.
class HilbertLayout {
 public:
  explicit HilbertLayout(std::vector<int> nuclear_dims = {}, bool st0_only = false)
      : nuclear_dims_(std::move(nuclear_dims)), st0_only_(st0_only) {
    nuclear_dim_ = 1;
    for (int d : nuclear_dims_) {
      if (d < 1) throw DomainError("nuclear multiplicity must be >= 1");
      nuclear_dim_ *= d;
    }
  }

  int nuclear_dim() const { return nuclear_dim_; }
  const std::vector<int>& nuclear_dims() const { return nuclear_dims_; }
  bool st0_only() const { return st0_only_; }

  int r_levels() const { return st0_only_ ? 2 : 4; }
  int r_dim() const { return r_levels() * nuclear_dim_; }
  int total_dim() const { return (r_levels() + 1) * nuclear_dim_; }

  std::span<const Channel> channels() const {
    static constexpr std::array<Channel, 4> all{Channel::S, Channel::T0, Channel::Tp,
                                                Channel::Tm};
    return std::span<const Channel>(all.data(), static_cast<size_t>(r_levels()));
  }

  std::span<const Channel> triplet_channels() const {
    auto ch = channels();
    return ch.subspan(1);
  }

  int block_index(Channel c) const {
    int b = static_cast<int>(c);
    if (b >= r_levels()) throw DimensionError("channel not present in this layout");
    return b;
  }

  int product_block() const { return r_levels(); }
  int block_offset(int block) const { return block * nuclear_dim_; }

  bool operator==(const HilbertLayout& other) const {
    return nuclear_dims_ == other.nuclear_dims_ && st0_only_ == other.st0_only_;
  }

 private:
  std::vector<int> nuclear_dims_;
  int nuclear_dim_ = 1;
  bool st0_only_ = false;
};

}  // namespace rpsim

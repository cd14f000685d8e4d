// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace linkguard {

// Subset of the binary label space {0 = non-branching, 1 = branching}.
class PredictionSet {
 public:
  constexpr PredictionSet() = default;
  static constexpr PredictionSet empty() { return PredictionSet(0); }
  static constexpr PredictionSet full() { return PredictionSet(3); }
  static constexpr PredictionSet of(int label) { return PredictionSet(label == 1 ? 2 : 1); }
  static constexpr PredictionSet from_mask(std::uint8_t mask) { return PredictionSet(mask & 3); }

  constexpr bool contains(int label) const { return (mask_ >> (label == 1 ? 1 : 0)) & 1; }
  constexpr void insert(int label) { mask_ |= label == 1 ? 2 : 1; }
  constexpr void erase(int label) { mask_ &= label == 1 ? 1 : 2; }
  constexpr int size() const { return (mask_ & 1) + ((mask_ >> 1) & 1); }
  constexpr bool is_empty() const { return mask_ == 0; }
  constexpr std::uint8_t mask() const { return mask_; }

  constexpr PredictionSet intersect(PredictionSet o) const { return PredictionSet(mask_ & o.mask_); }
  constexpr PredictionSet unite(PredictionSet o) const { return PredictionSet(mask_ | o.mask_); }
  constexpr bool subset_of(PredictionSet o) const { return (mask_ & ~o.mask_) == 0; }

  std::string to_string() const {
    switch (mask_) {
      case 0: return "{}";
      case 1: return "{0}";
      case 2: return "{1}";
      default: return "{0,1}";
    }
  }

  constexpr bool operator==(const PredictionSet&) const = default;

 private:
  constexpr explicit PredictionSet(std::uint8_t mask) : mask_(mask) {}
  std::uint8_t mask_ = 0;
};

}  // namespace linkguard

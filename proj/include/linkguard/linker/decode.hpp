// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "linkguard/core/catalog.hpp"
#include "linkguard/core/trace.hpp"

namespace linkguard::linker {

struct DecodedEntity {
  std::string name;
  std::size_t begin = 0;  // first token index
  std::size_t end = 0;    // one past the last name token
};

struct Decoded {
  std::vector<DecodedEntity> entities;  // emission order, first occurrence only
  std::string suffix;                   // text of the unmatched tail
  std::size_t suffix_begin = 0;         // token index where the tail starts
  bool eos = false;

  std::vector<std::string> names() const;
  bool contains(const std::string& name) const;
};

// Splits the token stream at separators and matches every segment against
// entity names. The first segment that is not a complete name, together with
// everything after it, becomes the suffix. A trailing unterminated segment
// that spells a full name counts as matched. Decoding stops at eos.
Decoded decode(std::span<const core::TokenId> tokens, const core::EntitySet& entities,
               const core::Vocabulary& vocabulary);

struct TraceBack {
  std::vector<std::string> candidates;  // the implicated entities, catalog order
  std::size_t first_begin = 0;          // start token of the earliest candidate
  std::size_t steps = 0;                // model steps taken after the branch token
  bool reached_eos = false;
};

// `model` has just committed the flagged token. Keeps generating (and
// committing) until decoding yields an entity that the prefix before the
// flagged token did not contain, or until eos, in which case the last decoded
// entity is returned. Throws SessionError when max_steps is exhausted or the
// model fails.
TraceBack trace_back(core::Generator& model, const core::EntitySet& entities,
                     const core::Vocabulary& vocabulary, std::size_t max_steps = 256);

}  // namespace linkguard::linker

// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/linker/decode.hpp"

#include <algorithm>
#include <exception>

#include "linkguard/common/error.hpp"

namespace linkguard::linker {

std::vector<std::string> Decoded::names() const {
  std::vector<std::string> out;
  out.reserve(entities.size());
  for (const auto& e : entities) out.push_back(e.name);
  return out;
}

bool Decoded::contains(const std::string& name) const {
  return std::any_of(entities.begin(), entities.end(),
                     [&](const DecodedEntity& e) { return e.name == name; });
}

Decoded decode(std::span<const core::TokenId> tokens, const core::EntitySet& entities,
               const core::Vocabulary& vocabulary) {
  Decoded out;
  std::size_t stop = tokens.size();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (vocabulary.is_eos(tokens[i])) {
      stop = i;
      out.eos = true;
      break;
    }
  }
  std::string segment;
  std::size_t seg_begin = 0;
  for (std::size_t i = 0; i <= stop; ++i) {
    const bool boundary = i == stop || vocabulary.is_separator(tokens[i]);
    if (!boundary) {
      segment += vocabulary.at(tokens[i]).text;
      continue;
    }
    const bool last = i == stop;
    // An empty trailing segment (nothing after the last separator) is neither
    // a match nor a suffix.
    if (last && segment.empty()) {
      out.suffix_begin = seg_begin;
      return out;
    }
    if (!entities.contains(segment)) {
      out.suffix = vocabulary.text(tokens.subspan(seg_begin, stop - seg_begin));
      out.suffix_begin = seg_begin;
      return out;
    }
    if (!out.contains(segment)) out.entities.push_back({segment, seg_begin, i});
    segment.clear();
    seg_begin = i + 1;
    if (last) {
      out.suffix_begin = stop;
      return out;
    }
  }
  return out;
}

TraceBack trace_back(core::Generator& model, const core::EntitySet& entities,
                     const core::Vocabulary& vocabulary, std::size_t max_steps) {
  const auto& x = model.committed();
  if (x.empty()) throw PreconditionError("trace_back: no flagged token");
  const auto before = decode(std::span(x).first(x.size() - 1), entities, vocabulary);

  TraceBack tb;
  while (true) {
    const auto now = decode(model.committed(), entities, vocabulary);
    std::vector<std::size_t> fresh;
    for (std::size_t i = 0; i < now.entities.size(); ++i) {
      if (!before.contains(now.entities[i].name)) fresh.push_back(i);
    }
    if (!fresh.empty()) {
      tb.first_begin = now.entities[fresh.front()].begin;
      std::vector<std::string> names;
      for (auto i : fresh) names.push_back(now.entities[i].name);
      tb.candidates = entities.in_catalog_order(names);
      return tb;
    }
    if (!model.committed().empty() && vocabulary.is_eos(model.committed().back())) {
      tb.reached_eos = true;
      if (!now.entities.empty()) {
        tb.candidates = {now.entities.back().name};
        tb.first_begin = now.entities.back().begin;
      }
      return tb;
    }
    if (tb.steps == max_steps) {
      throw SessionError("trace-back exceeded " + std::to_string(max_steps) + " model steps");
    }
    try {
      const auto step = model.propose();
      model.commit(step.token);
    } catch (const SessionError&) {
      throw;
    } catch (const std::exception& e) {
      throw SessionError(std::string("model failed during trace-back: ") + e.what());
    }
    ++tb.steps;
  }
}

}  // namespace linkguard::linker

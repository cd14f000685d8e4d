// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#include "linkguard/core/catalog.hpp"

#include <algorithm>
#include <unordered_set>

#include "linkguard/common/error.hpp"

namespace linkguard::core {

Vocabulary::Vocabulary(std::vector<Token> tokens) : tokens_(std::move(tokens)) {
  std::size_t eos_count = 0;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const Token& t = tokens_[i];
    if (!by_id_.emplace(t.id, i).second) {
      throw FormatError("vocabulary: duplicate token id " + std::to_string(t.id));
    }
    if (t.text.empty()) {
      throw FormatError("vocabulary: token " + std::to_string(t.id) + " has empty text");
    }
    if (!by_text_.emplace(t.text, t.id).second) {
      throw FormatError("vocabulary: duplicate token text '" + t.text + "'");
    }
    if (t.is_eos) {
      ++eos_count;
      eos_ = t.id;
    }
    if (t.is_separator && separator_ < 0) separator_ = t.id;
  }
  if (eos_count != 1) {
    throw FormatError("vocabulary: expected exactly one eos token, found " +
                      std::to_string(eos_count));
  }
  if (separator_ < 0) throw FormatError("vocabulary: no separator token");
}

Vocabulary Vocabulary::from_pieces(const std::vector<std::string>& pieces) {
  std::vector<Token> tokens;
  std::unordered_set<std::string> seen;
  for (const auto& p : pieces) {
    if (seen.insert(p).second) {
      tokens.push_back({static_cast<TokenId>(tokens.size()), p, false, false});
    }
  }
  tokens.push_back({static_cast<TokenId>(tokens.size()), std::string(kQualifierText), false, false});
  tokens.push_back({static_cast<TokenId>(tokens.size()), std::string(kSeparatorText), true, false});
  tokens.push_back({static_cast<TokenId>(tokens.size()), std::string(kEosText), false, true});
  return Vocabulary(std::move(tokens));
}

const Token& Vocabulary::at(TokenId id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) {
    throw PreconditionError("token id " + std::to_string(id) + " not in vocabulary");
  }
  return tokens_[it->second];
}

std::optional<TokenId> Vocabulary::find(std::string_view text) const {
  auto it = by_text_.find(std::string(text));
  if (it == by_text_.end()) return std::nullopt;
  return it->second;
}

bool Vocabulary::is_separator(TokenId id) const {
  auto it = by_id_.find(id);
  return it != by_id_.end() && tokens_[it->second].is_separator;
}

std::string Vocabulary::text(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) out += at(id).text;
  return out;
}

std::optional<std::vector<TokenId>> Vocabulary::decompose(std::string_view text) const {
  const std::size_t n = text.size();
  // best[i]: optimal decomposition of text[i..n).
  std::vector<std::optional<std::vector<TokenId>>> best(n + 1);
  best[n] = std::vector<TokenId>{};
  for (std::size_t i = n; i-- > 0;) {
    for (const Token& t : tokens_) {
      if (t.is_eos || t.is_separator) continue;
      if (text.substr(i, t.text.size()) != t.text) continue;
      const auto& rest = best[i + t.text.size()];
      if (!rest) continue;
      std::vector<TokenId> cand;
      cand.reserve(rest->size() + 1);
      cand.push_back(t.id);
      cand.insert(cand.end(), rest->begin(), rest->end());
      if (!best[i] || cand.size() < best[i]->size() ||
          (cand.size() == best[i]->size() && cand < *best[i])) {
        best[i] = std::move(cand);
      }
    }
  }
  if (n == 0) return std::nullopt;
  return best[0];
}

std::string qualify(std::string_view table, std::string_view column) {
  std::string out(table);
  out += kQualifierText;
  out += column;
  return out;
}

EntitySet::EntitySet(std::vector<Entity> entities) : entities_(std::move(entities)) {
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    if (!index_.emplace(entities_[i].name, i).second) {
      throw PreconditionError("duplicate entity name '" + entities_[i].name + "'");
    }
  }
}

std::optional<std::size_t> EntitySet::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> EntitySet::in_catalog_order(std::span<const std::string> names) const {
  std::vector<std::size_t> idx;
  for (const auto& n : names) {
    if (auto i = index_of(n)) idx.push_back(*i);
  }
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(entities_[i].name);
  return out;
}

namespace {

void check_name(std::string_view kind, std::string_view name) {
  if (name.empty()) throw FormatError(std::string(kind) + " name is empty");
  if (name.find(kSeparatorText) != std::string_view::npos ||
      name.find(kQualifierText) != std::string_view::npos) {
    throw FormatError(std::string(kind) + " name '" + std::string(name) +
                      "' contains a separator or qualifier character");
  }
}

}  // namespace

SchemaCatalog SchemaCatalog::create(std::vector<TableSchema> tables, Vocabulary vocabulary) {
  if (tables.empty()) throw FormatError("catalog: at least one table required");
  std::unordered_set<std::string> names;
  for (const auto& t : tables) {
    check_name("table", t.name);
    if (!names.insert(t.name).second) {
      throw FormatError("catalog: duplicate table name '" + t.name + "'");
    }
    if (t.columns.empty()) {
      throw FormatError("catalog: table '" + t.name + "' has no columns");
    }
    if (!vocabulary.decompose(t.name)) {
      throw FormatError("catalog: table name '" + t.name + "' does not decompose into vocabulary");
    }
    std::unordered_set<std::string> cols;
    for (const auto& c : t.columns) {
      check_name("column", c);
      if (!cols.insert(c).second) {
        throw FormatError("catalog: duplicate column '" + c + "' in table '" + t.name + "'");
      }
      if (!vocabulary.decompose(c)) {
        throw FormatError("catalog: column name '" + c + "' does not decompose into vocabulary");
      }
    }
  }
  SchemaCatalog cat;
  cat.tables_ = std::move(tables);
  cat.vocabulary_ = std::move(vocabulary);
  return cat;
}

const TableSchema* SchemaCatalog::find_table(std::string_view name) const {
  for (const auto& t : tables_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<TokenId> SchemaCatalog::tokenize(std::string_view name) const {
  auto q = name.find(kQualifierText);
  if (q != std::string_view::npos) {
    auto qual = vocabulary_.find(kQualifierText);
    if (!qual) throw FormatError("vocabulary has no qualifier token");
    auto out = tokenize(name.substr(0, q));
    auto col = tokenize(name.substr(q + 1));
    out.push_back(*qual);
    out.insert(out.end(), col.begin(), col.end());
    return out;
  }
  auto ids = vocabulary_.decompose(name);
  if (!ids) throw FormatError("name '" + std::string(name) + "' does not decompose into vocabulary");
  return *ids;
}

EntitySet SchemaCatalog::table_entities() const {
  std::vector<Entity> out;
  out.reserve(tables_.size());
  for (const auto& t : tables_) out.push_back({t.name, tokenize(t.name), t.name});
  return EntitySet(std::move(out));
}

EntitySet SchemaCatalog::column_entities(std::span<const std::string> tables) const {
  std::unordered_set<std::string> wanted(tables.begin(), tables.end());
  std::vector<Entity> out;
  for (const auto& t : tables_) {
    if (!wanted.contains(t.name)) continue;
    for (const auto& c : t.columns) {
      auto name = qualify(t.name, c);
      auto toks = tokenize(name);
      out.push_back({std::move(name), std::move(toks), t.name});
    }
  }
  return EntitySet(std::move(out));
}

std::vector<TokenId> SchemaCatalog::linking_tokens(const EntitySet& entities,
                                                   std::span<const std::string> names) const {
  std::vector<TokenId> out;
  bool first = true;
  for (const auto& name : entities.in_catalog_order(names)) {
    if (!first) out.push_back(vocabulary_.separator());
    first = false;
    const auto& e = entities[*entities.index_of(name)];
    out.insert(out.end(), e.tokens.begin(), e.tokens.end());
  }
  out.push_back(vocabulary_.eos());
  return out;
}

}  // namespace linkguard::core

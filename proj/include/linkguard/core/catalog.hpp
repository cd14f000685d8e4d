// Copyright 2026 The linkguard Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace linkguard::core {

using TokenId = std::int32_t;

struct Token {
  TokenId id = 0;
  std::string text;
  bool is_separator = false;
  bool is_eos = false;

  bool operator==(const Token&) const = default;
};

inline constexpr std::string_view kSeparatorText = ",";
inline constexpr std::string_view kQualifierText = ".";
inline constexpr std::string_view kEosText = "<eos>";

// Constrained token vocabulary. Ids are unique, texts are unique and exactly
// one token is the end-of-sequence marker.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<Token> tokens);

  // Name pieces get ids 0..P-1 in first-appearance order, followed by the
  // qualifier ".", the separator "," and eos.
  static Vocabulary from_pieces(const std::vector<std::string>& pieces);

  const std::vector<Token>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  bool contains(TokenId id) const { return by_id_.contains(id); }
  const Token& at(TokenId id) const;
  std::optional<TokenId> find(std::string_view text) const;

  TokenId eos() const { return eos_; }
  TokenId separator() const { return separator_; }
  bool is_eos(TokenId id) const { return id == eos_; }
  bool is_separator(TokenId id) const;

  std::string text(std::span<const TokenId> ids) const;

  // Exact decomposition of `text` into name pieces using the fewest tokens;
  // ties resolve to the lexicographically smallest id sequence.
  std::optional<std::vector<TokenId>> decompose(std::string_view text) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<Token> tokens_;
  std::unordered_map<TokenId, std::size_t> by_id_;
  std::unordered_map<std::string, TokenId> by_text_;
  TokenId eos_ = -1;
  TokenId separator_ = -1;
};

struct TableSchema {
  std::string name;
  std::vector<std::string> columns;

  bool operator==(const TableSchema&) const = default;
};

// Something a linking stage can emit: a table, or a column qualified by its
// table ("table.column").
struct Entity {
  std::string name;
  std::vector<TokenId> tokens;
  std::string table;

  bool operator==(const Entity&) const = default;
};

std::string qualify(std::string_view table, std::string_view column);

// Ordered entity list with name lookup. Order is catalog order and is the
// canonical emission order of ground-truth linkings.
class EntitySet {
 public:
  EntitySet() = default;
  explicit EntitySet(std::vector<Entity> entities);

  const std::vector<Entity>& entities() const { return entities_; }
  std::size_t size() const { return entities_.size(); }
  const Entity& operator[](std::size_t i) const { return entities_[i]; }
  std::optional<std::size_t> index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return index_of(name).has_value(); }

  // Names sorted into catalog order; unknown names are dropped.
  std::vector<std::string> in_catalog_order(std::span<const std::string> names) const;

 private:
  std::vector<Entity> entities_;
  std::unordered_map<std::string, std::size_t> index_;
};

class SchemaCatalog {
 public:
  SchemaCatalog() = default;

  // Validates: at least one table, unique table names, at least one column
  // per table, unique column names within a table, no separator or qualifier
  // characters inside names, and every name decomposes into vocabulary pieces.
  static SchemaCatalog create(std::vector<TableSchema> tables, Vocabulary vocabulary);

  const std::vector<TableSchema>& tables() const { return tables_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }
  const TableSchema* find_table(std::string_view name) const;

  std::vector<TokenId> tokenize(std::string_view name) const;

  EntitySet table_entities() const;
  // Qualified columns of the named tables, in catalog order. Unknown table
  // names are ignored.
  EntitySet column_entities(std::span<const std::string> tables) const;

  // Tokens of `names` (catalog order) joined by the separator and closed by eos.
  std::vector<TokenId> linking_tokens(const EntitySet& entities,
                                      std::span<const std::string> names) const;

  bool operator==(const SchemaCatalog& other) const {
    return tables_ == other.tables_ && vocabulary_ == other.vocabulary_;
  }

 private:
  std::vector<TableSchema> tables_;
  Vocabulary vocabulary_;
};

}  // namespace linkguard::core

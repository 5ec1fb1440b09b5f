#pragma once

// Adapter for the published DiscoGeM release layout: one CSV row per item,
// item metadata in named columns and one column per worker holding that
// worker's label (empty when the worker did not annotate the item).

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "discorel/corpus.hpp"

namespace discorel::discogem {

// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view data, char sep = ',') {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    char c = data[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < data.size() && data[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == sep) {
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < data.size() && data[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
      if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
      row.clear();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorCode::parse_error, "csv: unterminated quoted field");
  if (field_started || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

struct Layout {
  std::string item_id_column = "itemid";
  std::string genre_column = "genre";
  std::string arg1_column = "arg1";
  std::string arg2_column = "arg2";
  std::string context_column;          // optional, empty = absent
  std::string reference_column;        // optional; labels separated by reference_separator
  char reference_separator = ';';
  std::string worker_column_prefix = "worker_";  // every column starting with this holds one worker's label
  Method method = Method::dc;
  char separator = ',';
};

struct ImportResult {
  Corpus corpus;
  std::size_t rows = 0;
  std::size_t votes = 0;
};

inline ImportResult import_csv(std::string_view data, const Layout& layout,
                               const SenseVocabulary& vocab = SenseVocabulary::pdtb3()) {
  auto rows = parse_csv(data, layout.separator);
  if (rows.empty()) throw Error(ErrorCode::parse_error, "csv: missing header");
  const auto& header = rows.front();
  auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    if (name.empty()) return std::nullopt;
    for (std::size_t i = 0; i < header.size(); ++i)
      if (text::lower(text::trim(header[i])) == text::lower(name)) return i;
    if (required) throw Error(ErrorCode::parse_error, "csv: missing column '" + name + "'");
    return std::nullopt;
  };
  auto id_col = *column(layout.item_id_column, true);
  auto genre_col = column(layout.genre_column, false);
  auto a1_col = *column(layout.arg1_column, true);
  auto a2_col = *column(layout.arg2_column, true);
  auto ctx_col = column(layout.context_column, false);
  auto ref_col = column(layout.reference_column, false);
  std::vector<std::pair<std::size_t, std::string>> worker_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto h = std::string(text::trim(header[i]));
    if (text::starts_with(text::lower(h), text::lower(layout.worker_column_prefix)))
      worker_cols.emplace_back(i, h.substr(layout.worker_column_prefix.size()));
  }

  ImportResult out{Corpus(vocab), 0, 0};
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto cell = [&](std::size_t c) -> std::string { return c < row.size() ? std::string(text::trim(row[c])) : ""; };
    auto where = [&] { return "csv row " + std::to_string(r + 1); };
    RelationItem item;
    item.item_id = cell(id_col);
    item.genre = genre_col ? text::lower(cell(*genre_col)) : "";
    item.s1 = cell(a1_col);
    item.s2 = cell(a2_col);
    if (ctx_col && !cell(*ctx_col).empty()) item.context = cell(*ctx_col);
    try {
      if (ref_col && !cell(*ref_col).empty()) {
        LabelSet ref;
        for (const auto& l : text::split(cell(*ref_col), layout.reference_separator))
          if (!text::trim(l).empty()) ref.insert(vocab.parse_id(vocab.merge_belief_speechact(l)));
        item.reference = std::move(ref);
      }
      out.corpus.add_item(item);
      for (const auto& [c, worker] : worker_cols) {
        auto label = cell(c);
        if (label.empty()) continue;
        Vote v;
        v.item_id = item.item_id;
        v.method = layout.method;
        v.worker_id = worker;
        v.sense = vocab.parse_id(vocab.merge_belief_speechact(label));
        out.corpus.add_vote(std::move(v));
        ++out.votes;
      }
    } catch (const Error& e) {
      throw Error(e.code(), where() + ": " + e.message());
    }
    ++out.rows;
  }
  return out;
}

}  // namespace discorel::discogem

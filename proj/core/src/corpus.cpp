// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/corpus.hpp"

#include <map>
#include <set>

#include "buzzdef/digest.hpp"
#include "buzzdef/resources.hpp"
#include "buzzdef/text.hpp"

namespace buzzdef::corpus {

namespace {

constexpr std::string_view kPlaceholder = "[BUZZWORD]";

std::string require_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw CorpusError(std::string("missing field '") + key + "'");
  if (!it->is_string()) throw CorpusError(std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

}  // namespace

std::optional<std::string> validate(const BuzzwordEntry& e) {
  if (e.word.empty()) return "empty word";
  if (e.definition.empty()) return "empty definition";
  if (e.examples.empty()) return "no examples";
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < e.examples.size(); ++i) {
    const auto& ex = e.examples[i];
    if (ex.empty()) return "example " + std::to_string(i) + " is empty";
    if (!text::contains(ex, e.word))
      return "example " + std::to_string(i) + " does not contain the complete word";
    if (!seen.insert(ex).second) return "duplicate example at index " + std::to_string(i);
  }
  return std::nullopt;
}

BuzzwordEntry entry_from_json(const Json& j) {
  if (!j.is_object()) throw CorpusError("record is not an object");
  BuzzwordEntry e;
  e.word = require_string(j, "word");
  e.description = j.contains("description") ? require_string(j, "description") : "";
  e.definition = require_string(j, "definition");
  auto it = j.find("examples");
  if (it == j.end()) throw CorpusError("missing field 'examples'");
  if (!it->is_array()) throw CorpusError("field 'examples' is not an array");
  for (const auto& x : *it) {
    if (!x.is_string()) throw CorpusError("non-string example");
    e.examples.push_back(x.get<std::string>());
  }
  return e;
}

Json entry_to_json(const BuzzwordEntry& e) {
  return Json{{"word", e.word},
              {"description", e.description},
              {"definition", e.definition},
              {"examples", e.examples}};
}

LoadResult load_corpus(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw CorpusError("cannot read corpus: " + path.string());
  LoadResult result;
  std::map<std::string, std::size_t> first_line;
  try {
    for_each_line(path, [&](std::size_t line, std::string_view raw) {
      BuzzwordEntry e;
      try {
        e = entry_from_json(Json::parse(raw));
      } catch (const Json::parse_error& ex) {
        result.rejected.push_back({line, "", std::string("malformed record: ") + ex.what()});
        return;
      } catch (const CorpusError& ex) {
        result.rejected.push_back({line, "", std::string("malformed record: ") + ex.what()});
        return;
      }
      auto [it, inserted] = first_line.emplace(e.word, line);
      if (!inserted) {
        throw CorpusError("duplicate word '" + e.word + "' on lines " +
                          std::to_string(it->second) + " and " + std::to_string(line));
      }
      if (auto why = validate(e)) {
        result.rejected.push_back({line, e.word, *why});
        return;
      }
      result.entries.push_back(std::move(e));
    });
  } catch (const CorpusError&) {
    throw;
  } catch (const std::runtime_error& ex) {
    throw CorpusError(ex.what());
  }
  return result;
}

void save_corpus(const std::filesystem::path& path, const std::vector<BuzzwordEntry>& entries) {
  std::vector<Json> rows;
  rows.reserve(entries.size());
  for (const auto& e : entries) rows.push_back(entry_to_json(e));
  write_jsonl(path, rows);
}

CorpusStats compute_stats(const std::vector<BuzzwordEntry>& corpus) {
  CorpusStats s;
  s.n_buzzwords = corpus.size();
  if (corpus.empty()) return s;
  std::size_t desc = 0, defn = 0, ex_len = 0;
  for (const auto& e : corpus) {
    s.n_examples += e.examples.size();
    desc += text::scalar_length(e.description);
    defn += text::scalar_length(e.definition);
    for (const auto& x : e.examples) ex_len += text::scalar_length(x);
  }
  const auto n = static_cast<double>(s.n_buzzwords);
  s.avg_examples_per_word = static_cast<double>(s.n_examples) / n;
  s.avg_len_description = static_cast<double>(desc) / n;
  s.avg_len_definition = static_cast<double>(defn) / n;
  s.avg_len_examples =
      s.n_examples == 0 ? 0.0 : static_cast<double>(ex_len) / static_cast<double>(s.n_examples);
  return s;
}

const BuzzwordEntry* find_entry(const std::vector<BuzzwordEntry>& corpus, std::string_view word) {
  for (const auto& e : corpus)
    if (e.word == word) return &e;
  return nullptr;
}

std::string corpus_id(const std::vector<BuzzwordEntry>& corpus) {
  std::string buf;
  for (const auto& e : corpus) {
    buf += dump_line(entry_to_json(e));
    buf += '\n';
  }
  return sha256_hex(buf).substr(0, 16);
}

FilterResult filter_definitional(const BuzzwordEntry& entry,
                                 const std::vector<std::string>& patterns) {
  std::vector<std::string> instantiated;
  instantiated.reserve(patterns.size());
  for (const auto& p : patterns) {
    auto inst = text::replace_all(p, kPlaceholder, entry.word);
    if (!inst.empty()) instantiated.push_back(std::move(inst));
  }

  FilterResult r;
  r.entry = entry;
  r.entry.examples.clear();
  for (std::size_t i = 0; i < entry.examples.size(); ++i) {
    const auto& sentence = entry.examples[i];
    const std::string* hit = nullptr;
    for (const auto& inst : instantiated) {
      if (text::contains(sentence, inst)) {
        hit = &inst;
        break;
      }
    }
    if (hit) {
      r.removed.push_back({i, sentence, *hit});
    } else {
      r.entry.examples.push_back(sentence);
    }
  }
  r.valid = !r.entry.examples.empty();
  return r;
}

std::vector<std::string> default_definitional_patterns() {
  return text::parse_list(builtin_resource("definitional_patterns.txt"));
}

}  // namespace buzzdef::corpus

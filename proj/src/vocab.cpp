#include <algorithm>
#include <fstream>
#include <map>

#include "hsd/encoder.hpp"
#include "hsd/error.hpp"

namespace hsd {

namespace {

constexpr std::size_t kMaxCharsPerWord = 100;

std::vector<std::string_view> whitespace_tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (i < s.size()) {
    while (i < s.size() && space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) { index(); }

void Vocabulary::index() {
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    ids_.emplace(tokens_[i], static_cast<std::int32_t>(i));
  }
  auto special = [&](const char* name) {
    auto it = ids_.find(name);
    if (it == ids_.end()) {
      throw Error(ErrorCode::kInvalidConfig, std::string("vocabulary lacks ") + name);
    }
    return it->second;
  };
  pad_ = special(kPad);
  unk_ = special(kUnk);
  cls_ = special(kCls);
  sep_ = special(kSep);
  if (pad_ != 0) throw Error(ErrorCode::kInvalidConfig, "[PAD] must have id 0");
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot read vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::build(std::span<const std::string> texts,
                             std::span<const std::string> placeholders, std::size_t max_size) {
  std::vector<std::string> tokens = {kPad, kUnk, kCls, kSep, "[MASK]"};
  std::unordered_map<std::string, bool> present;
  auto add = [&](const std::string& t) {
    if (present.emplace(t, true).second) tokens.push_back(t);
  };
  for (const auto& t : tokens) present.emplace(t, true);
  for (const auto& p : placeholders) add(p);
  for (char c = 'a'; c <= 'z'; ++c) add(std::string(1, c));
  for (char c = 'a'; c <= 'z'; ++c) add(std::string(kContinuation) + c);

  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto w : whitespace_tokens(text)) ++counts[std::string(w)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [word, count] : ranked) {
    if (tokens.size() >= max_size) break;
    add(word);
  }
  return Vocabulary(std::move(tokens));
}

std::size_t Vocabulary::register_placeholders(std::span<const std::string> placeholders,
                                              bool allow_growth) {
  std::size_t appended = 0;
  for (const auto& p : placeholders) {
    if (ids_.count(p)) continue;
    // lowest-numbered free "[unusedN]" slot
    std::optional<std::size_t> slot;
    long best = -1;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      const auto& t = tokens_[i];
      if (t.rfind("[unused", 0) == 0 && t.back() == ']') {
        const long n = std::strtol(t.c_str() + 7, nullptr, 10);
        if (!slot || n < best) {
          slot = i;
          best = n;
        }
      }
    }
    if (slot) {
      tokens_[*slot] = p;
    } else if (allow_growth) {
      tokens_.push_back(p);
      ++appended;
    } else {
      throw Error(ErrorCode::kShapeMismatch,
                  "no free vocabulary slot for placeholder " + p);
    }
    index();
  }
  return appended;
}

std::optional<std::int32_t> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::int32_t> wordpiece(std::string_view text, const Vocabulary& vocab) {
  std::vector<std::int32_t> out;
  std::string candidate;
  for (auto word : whitespace_tokens(text)) {
    if (word.size() > kMaxCharsPerWord) {
      out.push_back(vocab.unk_id());
      continue;
    }
    std::vector<std::int32_t> pieces;
    bool bad = false;
    std::size_t start = 0;
    while (start < word.size()) {
      std::optional<std::int32_t> match;
      std::size_t end = word.size();
      for (; end > start; --end) {
        candidate.clear();
        if (start > 0) candidate = Vocabulary::kContinuation;
        candidate.append(word.substr(start, end - start));
        if ((match = vocab.find(candidate))) break;
      }
      if (!match) {
        bad = true;
        break;
      }
      pieces.push_back(*match);
      start = end;
    }
    if (bad) {
      out.push_back(vocab.unk_id());
    } else {
      out.insert(out.end(), pieces.begin(), pieces.end());
    }
  }
  return out;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len < 2) throw Error(ErrorCode::kInvalidConfig, "max_len must be at least 2");
  auto pieces = wordpiece(text, vocab);
  if (pieces.size() > max_len - 2) pieces.resize(max_len - 2);
  TokenSequence seq;
  seq.ids.assign(max_len, vocab.pad_id());
  seq.attention_mask.assign(max_len, 0);
  seq.ids[0] = vocab.cls_id();
  std::copy(pieces.begin(), pieces.end(), seq.ids.begin() + 1);
  seq.content_length = pieces.size() + 2;
  seq.ids[seq.content_length - 1] = vocab.sep_id();
  std::fill_n(seq.attention_mask.begin(), seq.content_length, 1);
  return seq;
}

}  // namespace hsd

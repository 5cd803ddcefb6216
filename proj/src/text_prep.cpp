#include "hsd/text_prep.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hsd/error.hpp"

namespace hsd {

namespace detail {
extern const char* const kBuiltinLexicon;
}

namespace {

bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ascii_alnum(char c) { return is_ascii_alpha(c) || is_ascii_digit(c); }
bool is_word_char(char c) { return is_ascii_alnum(c) || c == '_'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = lower(c);
  return out;
}

bool starts_with_icase(std::string_view s, std::size_t pos, std::string_view prefix) {
  if (s.size() - pos < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (lower(s[pos + i]) != prefix[i]) return false;
  }
  return true;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

// Text under normalization: plain spans plus protected placeholder tokens.
struct Piece {
  std::string text;
  bool placeholder = false;
};
using Pieces = std::vector<Piece>;

void push_text(Pieces& out, std::string text) {
  if (text.empty()) return;
  if (!out.empty() && !out.back().placeholder) {
    out.back().text += text;
  } else {
    out.push_back({std::move(text), false});
  }
}

void push_placeholder(Pieces& out, const std::string& placeholder) {
  out.push_back({placeholder, true});
}

// Applies `scan` to every plain piece. `scan` appends the rewritten content
// and returns whether it changed anything.
template <typename Scan>
bool rewrite(Pieces& pieces, Scan scan) {
  Pieces out;
  bool changed = false;
  for (auto& piece : pieces) {
    if (piece.placeholder) {
      out.push_back(std::move(piece));
      continue;
    }
    changed |= scan(std::string_view(piece.text), out);
  }
  pieces = std::move(out);
  return changed;
}

// Tokens already equal to a placeholder (from a previous pass) are protected.
Pieces initial_pieces(std::string_view raw, const Placeholders& ph) {
  const auto known = ph.all();
  Pieces pieces;
  std::size_t i = 0;
  while (i < raw.size()) {
    std::size_t start = i;
    while (i < raw.size() && is_space(raw[i])) ++i;
    if (i > start) push_text(pieces, std::string(raw.substr(start, i - start)));
    start = i;
    while (i < raw.size() && !is_space(raw[i])) ++i;
    if (i == start) continue;
    const auto token = raw.substr(start, i - start);
    if (std::find(known.begin(), known.end(), token) != known.end()) {
      push_placeholder(pieces, std::string(token));
    } else {
      push_text(pieces, std::string(token));
    }
  }
  return pieces;
}

bool replace_urls(std::string_view s, Pieces& out, const std::string& ph) {
  bool changed = false;
  std::string buf;
  std::size_t i = 0;
  while (i < s.size()) {
    const bool boundary = i == 0 || !is_word_char(s[i - 1]);
    if (boundary && (starts_with_icase(s, i, "http://") || starts_with_icase(s, i, "https://") ||
                     starts_with_icase(s, i, "www."))) {
      push_text(out, std::move(buf));
      buf.clear();
      push_placeholder(out, ph);
      while (i < s.size() && !is_space(s[i])) ++i;
      changed = true;
      continue;
    }
    buf += s[i++];
  }
  push_text(out, std::move(buf));
  return changed;
}

bool replace_mentions(std::string_view s, Pieces& out, const std::string& ph) {
  bool changed = false;
  std::string buf;
  std::size_t i = 0;
  while (i < s.size()) {
    const bool boundary = i == 0 || !is_word_char(s[i - 1]);
    if (s[i] == '@' && boundary && i + 1 < s.size() && is_word_char(s[i + 1])) {
      push_text(out, std::move(buf));
      buf.clear();
      push_placeholder(out, ph);
      ++i;
      while (i < s.size() && is_word_char(s[i])) ++i;
      changed = true;
      continue;
    }
    buf += s[i++];
  }
  push_text(out, std::move(buf));
  return changed;
}

std::optional<std::size_t> emoticon_suffix(std::string_view token) {
  std::optional<std::size_t> best;
  for (const auto& e : emoticons()) {
    if (e.size() < 2 || e.size() >= token.size() || is_ascii_alnum(e.front())) continue;
    if (token.substr(token.size() - e.size()) != e) continue;
    if (!is_ascii_alnum(token[token.size() - e.size() - 1])) continue;
    if (!best || e.size() > *best) best = e.size();
  }
  return best;
}

bool replace_emoticons(std::string_view s, Pieces& out, const std::string& ph) {
  const auto& list = emoticons();
  bool changed = false;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t start = i;
    while (i < s.size() && is_space(s[i])) ++i;
    if (i > start) push_text(out, std::string(s.substr(start, i - start)));
    start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i == start) continue;
    const auto token = s.substr(start, i - start);
    if (std::find(list.begin(), list.end(), token) != list.end()) {
      push_placeholder(out, ph);
      changed = true;
    } else if (auto len = emoticon_suffix(token)) {
      push_text(out, std::string(token.substr(0, token.size() - *len)));
      push_placeholder(out, ph);
      changed = true;
    } else {
      push_text(out, std::string(token));
    }
  }
  return changed;
}

bool replace_hashtags(std::string_view s, Pieces& out, const std::string& ph,
                      const Lexicon& lexicon, bool& unsegmented) {
  bool changed = false;
  std::string buf;
  std::size_t i = 0;
  while (i < s.size()) {
    const bool boundary = i == 0 || !is_word_char(s[i - 1]);
    if (s[i] == '#' && boundary && i + 1 < s.size() && is_word_char(s[i + 1])) {
      std::size_t end = i + 1;
      while (end < s.size() && is_word_char(s[end])) ++end;
      const auto tag = s.substr(i, end - i);
      if (auto words = try_segment_hashtag(tag, lexicon)) {
        buf += ' ';
        buf += *words;
        buf += ' ';
        changed = true;
      } else {
        push_text(out, std::move(buf));
        buf.clear();
        push_placeholder(out, ph);
        unsegmented = true;
      }
      i = end;
      continue;
    }
    buf += s[i++];
  }
  push_text(out, std::move(buf));
  return changed;
}

bool replace_numbers(std::string_view s, Pieces& out, const std::string& ph) {
  bool changed = false;
  std::string buf;
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_ascii_digit(s[i])) {
      push_text(out, std::move(buf));
      buf.clear();
      push_placeholder(out, ph);
      while (i < s.size()) {
        if (is_ascii_digit(s[i])) {
          ++i;
        } else if ((s[i] == '.' || s[i] == ',' || s[i] == ':') && i + 1 < s.size() &&
                   is_ascii_digit(s[i + 1])) {
          ++i;
        } else {
          break;
        }
      }
      changed = true;
      continue;
    }
    buf += s[i++];
  }
  push_text(out, std::move(buf));
  return changed;
}

bool collapse_words(std::string_view s, Pieces& out, int threshold) {
  std::string rewritten;
  rewritten.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_space(s[i])) {
      rewritten += s[i++];
      continue;
    }
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    rewritten += collapse_elongation(s.substr(start, i - start), threshold);
  }
  const bool changed = rewritten != s;
  push_text(out, std::move(rewritten));
  return changed;
}

bool is_apostrophe(std::string_view s, std::size_t i, std::size_t& width) {
  if (s[i] == '\'' || s[i] == '`') {
    width = 1;
    return true;
  }
  // U+2018, U+2019
  if (s.size() - i >= 3 && static_cast<unsigned char>(s[i]) == 0xE2 &&
      static_cast<unsigned char>(s[i + 1]) == 0x80 &&
      (static_cast<unsigned char>(s[i + 2]) == 0x98 ||
       static_cast<unsigned char>(s[i + 2]) == 0x99)) {
    width = 3;
    return true;
  }
  return false;
}

std::size_t utf8_width(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead & 0xE0) == 0xC0) return 2;
  if ((lead & 0xF0) == 0xE0) return 3;
  if ((lead & 0xF8) == 0xF0) return 4;
  return 1;
}

// Letters and whitespace survive; apostrophes vanish (joining the word);
// everything else, including non-ASCII codepoints, becomes a space.
bool strip_punctuation(std::string_view s, Pieces& out, int threshold) {
  std::string kept;
  kept.reserve(s.size());
  bool joined = false;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t width = 1;
    if (is_ascii_alpha(s[i]) || is_space(s[i])) {
      kept += s[i++];
    } else if (is_apostrophe(s, i, width)) {
      joined = true;
      i += width;
    } else {
      kept += ' ';
      i += std::min(utf8_width(static_cast<unsigned char>(s[i])), s.size() - i);
    }
  }
  if (joined) {
    // joining may fuse two short runs into an elongation
    Pieces tmp;
    collapse_words(kept, tmp, threshold);
    kept = tmp.empty() ? std::string{} : tmp.front().text;
  }
  const bool changed = kept != s;
  push_text(out, std::move(kept));
  return changed;
}

// Splits a hashtag body on '_', letter/digit transitions and camel case
// ("BanTheBurka" -> Ban|The|Burka, "NYCMarathon" -> NYC|Marathon).
std::vector<std::string> camel_fragments(std::string_view body) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  auto is_upper = [](char c) { return c >= 'A' && c <= 'Z'; };
  auto is_lower = [](char c) { return c >= 'a' && c <= 'z'; };
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '_') {
      flush();
      continue;
    }
    if (!cur.empty()) {
      const char prev = cur.back();
      const bool digit_switch = is_ascii_digit(prev) != is_ascii_digit(c);
      const bool lower_to_upper = is_lower(prev) && is_upper(c);
      const bool acronym_end = is_upper(prev) && is_upper(c) && i + 1 < body.size() &&
                               is_lower(body[i + 1]);
      if (digit_switch || lower_to_upper || acronym_end) flush();
    }
    cur += c;
  }
  flush();
  return out;
}

// Max-probability segmentation of a lowercase fragment.
std::optional<std::vector<std::string>> segment_fragment(const std::string& s,
                                                         const Lexicon& lexicon) {
  const std::size_t n = s.size();
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  std::vector<double> best(n + 1, kNone);
  std::vector<std::size_t> back(n + 1, 0);
  best[0] = 0.0;
  const std::size_t max_len = lexicon.max_word_length();
  for (std::size_t end = 1; end <= n; ++end) {
    const std::size_t first = end > max_len ? end - max_len : 0;
    for (std::size_t start = first; start < end; ++start) {
      if (best[start] == kNone) continue;
      const std::string_view word(s.data() + start, end - start);
      if (!lexicon.contains(word)) continue;
      const double score = best[start] + lexicon.log_probability(word);
      if (score > best[end]) {
        best[end] = score;
        back[end] = start;
      }
    }
  }
  if (best[n] == kNone) return std::nullopt;
  std::vector<std::string> words;
  for (std::size_t end = n; end > 0; end = back[end]) {
    words.push_back(s.substr(back[end], end - back[end]));
  }
  std::reverse(words.begin(), words.end());
  return words;
}

}  // namespace

Lexicon::Lexicon(std::map<std::string, double> counts) {
  for (auto& [word, count] : counts) {
    if (word.empty() || !(count > 0.0)) continue;
    total_ += count;
    max_len_ = std::max(max_len_, word.size());
    counts_.emplace(word, count);
  }
}

Lexicon Lexicon::parse(std::istream& in) {
  std::map<std::string, double> counts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorCode::kMalformedRow,
                  "lexicon line " + std::to_string(line_no) + ": expected word<TAB>count");
    }
    double count = 0.0;
    try {
      count = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kMalformedRow,
                  "lexicon line " + std::to_string(line_no) + ": bad count");
    }
    counts[to_lower(line.substr(0, tab))] += count;
  }
  return Lexicon(std::move(counts));
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot read lexicon " + path.string());
  return parse(in);
}

const Lexicon& Lexicon::builtin() {
  static const Lexicon lexicon = [] {
    std::istringstream in(detail::kBuiltinLexicon);
    return parse(in);
  }();
  return lexicon;
}

bool Lexicon::contains(std::string_view word) const { return counts_.find(word) != counts_.end(); }

double Lexicon::log_probability(std::string_view word) const {
  return std::log(counts_.find(word)->second / total_);
}

void NormalizerConfig::validate() const {
  if (elongation_run_threshold < 2) {
    throw Error(ErrorCode::kInvalidConfig, "elongation_run_threshold must be >= 2");
  }
  for (const auto& ph : placeholders.all()) {
    const bool ok = ph.size() >= 3 && ph.front() == '<' && ph.back() == '>' &&
                    std::all_of(ph.begin() + 1, ph.end() - 1,
                                [](char c) { return c >= 'a' && c <= 'z'; });
    if (!ok) {
      throw Error(ErrorCode::kInvalidConfig,
                  "placeholder '" + ph + "' must be '<' lowercase letters '>'");
    }
  }
}

const Lexicon& NormalizerConfig::segmentation_lexicon() const {
  return lexicon ? *lexicon : Lexicon::builtin();
}

const std::vector<std::string>& emoticons() {
  // No entry is made of lowercase letters only, so normalized output never
  // matches one on a second pass.
  static const std::vector<std::string> list = {
      ":)",  ":-)", ":))", ":)))", "(:",  "=)",  ":]",  ":}",  ":o)", ":(",  ":-(",  ":((",
      "):",  "=(",  ":[",  ":{",   ":'(", ":'-(", ";)", ";-)", ";D",  ";p",  ";P",   ":D",
      ":-D", "=D",  "xD",  "XD",  ":P",  ":-P", ":p",  ":-p", "=P",  ":b",   ":O",
      ":-O", ":o",  ":-o", ":0",   ":/",  ":-/", ":\\", ":|",  ":-|", ":*",  ":-*",  ":$",
      ":@",  ">:(", ">:)", "D:",   "<3",  "</3", "^_^", "^^",  "-_-", "o_O", "O_o",  "T_T",
      ":3",  "8-)", ":S",   ":s",  "\\o/", ":')"};
  return list;
}

std::string collapse_elongation(std::string_view word, int threshold) {
  std::string out;
  out.reserve(word.size());
  std::size_t i = 0;
  const auto limit = static_cast<std::size_t>(std::max(threshold, 2));
  while (i < word.size()) {
    std::size_t j = i + 1;
    while (j < word.size() && lower(word[j]) == lower(word[i])) ++j;
    if (j - i >= limit) {
      out += word[i];
    } else {
      out.append(word.substr(i, j - i));
    }
    i = j;
  }
  return out;
}

std::optional<std::string> try_segment_hashtag(std::string_view tag, const Lexicon& lexicon) {
  std::string_view body = tag;
  if (!body.empty() && body.front() == '#') body.remove_prefix(1);
  if (body.empty()) return std::nullopt;
  std::string joined;
  for (const auto& fragment : camel_fragments(body)) {
    std::vector<std::string> words;
    if (std::all_of(fragment.begin(), fragment.end(), is_ascii_digit)) {
      words.push_back(fragment);
    } else {
      auto seg = segment_fragment(to_lower(fragment), lexicon);
      if (!seg) return std::nullopt;
      words = std::move(*seg);
    }
    for (auto& w : words) {
      if (!joined.empty()) joined += ' ';
      joined += w;
    }
  }
  if (joined.empty()) return std::nullopt;
  return joined;
}

std::string segment_hashtag(std::string_view tag, const Lexicon& lexicon) {
  if (auto words = try_segment_hashtag(tag, lexicon)) return *words;
  std::string_view body = tag;
  if (!body.empty() && body.front() == '#') body.remove_prefix(1);
  return to_lower(body);
}

NormalizedText normalize(std::string_view raw, const NormalizerConfig& cfg) {
  cfg.validate();
  const auto& ph = cfg.placeholders;
  NormalizedText result;
  auto& rules = result.applied_rules;
  Pieces pieces = initial_pieces(raw, ph);

  if (rewrite(pieces, [&](std::string_view s, Pieces& out) { return replace_urls(s, out, ph.url); }))
    rules.emplace_back(rule::kUrl);
  if (rewrite(pieces,
              [&](std::string_view s, Pieces& out) { return replace_mentions(s, out, ph.user); }))
    rules.emplace_back(rule::kMention);
  if (rewrite(pieces, [&](std::string_view s, Pieces& out) {
        return replace_emoticons(s, out, ph.emoticon);
      }))
    rules.emplace_back(rule::kEmoticon);
  bool unsegmented = false;
  const bool segmented = rewrite(pieces, [&](std::string_view s, Pieces& out) {
    return replace_hashtags(s, out, ph.hashtag, cfg.segmentation_lexicon(), unsegmented);
  });
  if (segmented) rules.emplace_back(rule::kHashtag);
  if (unsegmented) rules.emplace_back(rule::kHashtagUnsegmented);
  if (rewrite(pieces,
              [&](std::string_view s, Pieces& out) { return replace_numbers(s, out, ph.number); }))
    rules.emplace_back(rule::kNumber);
  if (rewrite(pieces, [&](std::string_view s, Pieces& out) {
        return collapse_words(s, out, cfg.elongation_run_threshold);
      }))
    rules.emplace_back(rule::kElongation);
  if (rewrite(pieces, [&](std::string_view s, Pieces& out) {
        return strip_punctuation(s, out, cfg.elongation_run_threshold);
      }))
    rules.emplace_back(rule::kPunctuation);

  // whitespace collapse and lowercasing over the final token stream
  std::string before_ws;
  for (const auto& p : pieces) {
    if (p.placeholder) {
      before_ws += ' ';
      before_ws += p.text;
      before_ws += ' ';
    } else {
      before_ws += p.text;
    }
  }
  std::string text;
  for (const auto& tok : split_ws(before_ws)) {
    if (!text.empty()) text += ' ';
    text += tok;
  }
  const bool ws_changed = text != before_ws;
  if (ws_changed) rules.emplace_back(rule::kWhitespace);
  if (cfg.lowercase) {
    const std::string lowered = to_lower(text);
    if (lowered != text) rules.emplace_back(rule::kLowercase);
    text = lowered;
  }
  result.text = std::move(text);
  return result;
}

}  // namespace hsd

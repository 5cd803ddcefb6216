#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hsd {

// Word -> frequency table used for hashtag segmentation.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::map<std::string, double> counts);

  // Parses "word<TAB>count" lines; blank lines and '#' comments are skipped.
  static Lexicon parse(std::istream& in);
  static Lexicon load(const std::filesystem::path& path);
  // The lexicon compiled into the library.
  static const Lexicon& builtin();

  bool contains(std::string_view word) const;
  // log(count / total); only valid for contained words.
  double log_probability(std::string_view word) const;
  std::size_t max_word_length() const { return max_len_; }
  std::size_t size() const { return counts_.size(); }

 private:
  std::map<std::string, double, std::less<>> counts_;
  double total_ = 0.0;
  std::size_t max_len_ = 0;
};

struct Placeholders {
  std::string user = "<user>";
  std::string number = "<number>";
  std::string hashtag = "<hashtag>";
  std::string url = "<url>";
  std::string emoticon = "<emoticon>";

  std::vector<std::string> all() const { return {user, number, hashtag, url, emoticon}; }
};

struct NormalizerConfig {
  Placeholders placeholders;
  int elongation_run_threshold = 3;
  std::shared_ptr<const Lexicon> lexicon;  // null means Lexicon::builtin()
  bool lowercase = true;

  // Throws InvalidConfig. Placeholders must be "<" lowercase-letters ">".
  void validate() const;
  const Lexicon& segmentation_lexicon() const;
};

// Audit tags, in application order.
namespace rule {
inline constexpr const char* kUrl = "url";
inline constexpr const char* kMention = "mention";
inline constexpr const char* kEmoticon = "emoticon";
inline constexpr const char* kHashtag = "hashtag-segmented";
inline constexpr const char* kHashtagUnsegmented = "hashtag-unsegmented";
inline constexpr const char* kNumber = "number";
inline constexpr const char* kElongation = "elongation";
inline constexpr const char* kPunctuation = "punctuation";
inline constexpr const char* kWhitespace = "whitespace";
inline constexpr const char* kLowercase = "lowercase";
}  // namespace rule

struct NormalizedText {
  std::string text;
  std::vector<std::string> applied_rules;
};

// Tweet normalization. Rules run in a fixed order: URL, mention, emoticon,
// hashtag, number, elongation, punctuation/unknown codepoints, whitespace,
// lowercase. Placeholders emitted by the first five rules are never touched
// by the later ones. Stop words are kept. Idempotent on its own output.
NormalizedText normalize(std::string_view raw, const NormalizerConfig& cfg = {});

// "#BanTheBurka" -> "ban the burka". Splits camel case and digit boundaries,
// then picks the max-probability segmentation of each fragment. Returns the
// bare lowercased body when some fragment cannot be covered.
std::string segment_hashtag(std::string_view tag, const Lexicon& lexicon);

// As above but reports failure instead of falling back.
std::optional<std::string> try_segment_hashtag(std::string_view tag, const Lexicon& lexicon);

// Replaces every maximal run (case-insensitive) of one character with
// length >= threshold by a single occurrence: "yeeeessss" -> "yes".
std::string collapse_elongation(std::string_view word, int threshold = 3);

// The shipped emoticon inventory.
const std::vector<std::string>& emoticons();

}  // namespace hsd

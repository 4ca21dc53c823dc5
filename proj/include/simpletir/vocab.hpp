#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace simpletir {

struct UnknownCharacter : std::runtime_error {
  std::size_t position;
  explicit UnknownCharacter(std::size_t pos)
      : std::runtime_error("unknown character at position " + std::to_string(pos)),
        position(pos) {}
};

// Character-level vocabulary over a fixed alphabet, plus a reserved
// end-of-sequence token. A separate begin marker id (outside the sampled
// range) pads contexts at the left of a sequence.
class Vocabulary {
 public:
  // Alphabet given as an explicit string of distinct characters.
  explicit Vocabulary(std::string alphabet);

  // Printable ASCII (0x20..0x7e) plus newline.
  static Vocabulary ascii();

  int size() const { return static_cast<int>(alphabet_.size()) + 1; }  // chars + eos
  int eos_id() const { return static_cast<int>(alphabet_.size()); }
  int begin_id() const { return size(); }  // context pad marker, never sampled

  bool contains(char c) const { return char_to_id_[static_cast<unsigned char>(c)] >= 0; }
  int id_of(char c) const { return char_to_id_[static_cast<unsigned char>(c)]; }

  // Surface of a token id; eos has an empty surface.
  std::string_view surface(int id) const;

  std::vector<int> tokenize(std::string_view text) const;
  std::string detokenize(const std::vector<int>& ids) const;

  const std::string& alphabet() const { return alphabet_; }

 private:
  std::string alphabet_;
  int char_to_id_[256];
};

}  // namespace simpletir

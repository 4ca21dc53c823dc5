#include "simpletir/vocab.hpp"

#include <algorithm>

namespace simpletir {

Vocabulary::Vocabulary(std::string alphabet) : alphabet_(std::move(alphabet)) {
  if (alphabet_.empty()) {
    throw std::invalid_argument("alphabet must be nonempty");
  }
  std::fill(std::begin(char_to_id_), std::end(char_to_id_), -1);
  for (std::size_t i = 0; i < alphabet_.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(alphabet_[i]);
    if (char_to_id_[c] >= 0) {
      throw std::invalid_argument("duplicate character in alphabet");
    }
    char_to_id_[c] = static_cast<int>(i);
  }
}

Vocabulary Vocabulary::ascii() {
  std::string a;
  for (char c = 0x20; c < 0x7f; ++c) a.push_back(c);
  a.push_back('\n');
  return Vocabulary(std::move(a));
}

std::string_view Vocabulary::surface(int id) const {
  if (id == eos_id()) return {};
  return std::string_view(alphabet_).substr(static_cast<std::size_t>(id), 1);
}

std::vector<int> Vocabulary::tokenize(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    int id = char_to_id_[static_cast<unsigned char>(text[i])];
    if (id < 0) throw UnknownCharacter(i);
    ids.push_back(id);
  }
  return ids;
}

std::string Vocabulary::detokenize(const std::vector<int>& ids) const {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id > eos_id()) throw std::out_of_range("token id out of range");
    out.append(surface(id));
  }
  return out;
}

}  // namespace simpletir

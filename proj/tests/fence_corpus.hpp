#pragma once

// Fence-extraction corpus plus an independent reference scanner. The scanner
// walks characters tracking backtick runs, deliberately a different shape
// from the library's find()-based implementation.

#include <cctype>
#include <string>
#include <vector>

#include "simpletir/rng.hpp"

namespace testutil {

inline std::vector<std::string> reference_extract_blocks(const std::string& text) {
  std::vector<std::string> blocks;
  std::size_t i = 0;
  bool in_block = false;
  std::string current;
  std::size_t run = 0;
  while (i <= text.size()) {
    char c = i < text.size() ? text[i] : '\0';
    if (c == '`') {
      ++run;
      ++i;
      if (run == 3) {
        if (in_block) {
          // Close: strip an optional tag line.
          auto nl = current.find('\n');
          if (nl != std::string::npos) {
            bool tag = true;
            for (std::size_t k = 0; k < nl; ++k) {
              char t = current[k];
              if (!(std::isalnum(static_cast<unsigned char>(t)) || t == '_' || t == '+' ||
                    t == '-')) {
                tag = false;
                break;
              }
            }
            if (tag) current.erase(0, nl + 1);
          }
          blocks.push_back(current);
          current.clear();
        }
        in_block = !in_block;
        run = 0;
      }
      continue;
    }
    // A partial backtick run belongs to the surrounding text.
    if (in_block) current.append(run, '`');
    run = 0;
    if (i == text.size()) break;
    if (in_block) current.push_back(c);
    ++i;
  }
  return blocks;
}

inline std::vector<std::string> fence_corpus() {
  std::vector<std::string> cases = {
      "",
      "no fences at all",
      "run ```print(1)``` done",
      "start ```x = 1",
      "```a``` mid ```b```",
      "``````",
      "``` ```",
      "```python\nprint(1)\n```",
      "```py3\nx=1```",
      "```not a tag!\nbody```",
      "```\nleading blank tag line```",
      "`` two backticks only ``",
      "text `inline` and ```block``` mixed",
      "````",
      "```a``````b```",
      "prefix```python\n```suffix",
      "```tag-with-dash\ncontent\nmore```",
      "unclosed at end ```python\nprint(",
      "```b1``` then \\boxed{5} then ```b2```",
      "```x\n```\n```y\n```",
  };
  // Random compositions over fence-adjacent fragments.
  const std::vector<std::string> frags = {
      "```", "``", "`", "\n", "py\n", "python3\n", "tag!\n", "x=1", " reasoning ",
      "print(2+3)", "\\boxed{7}", "final_answer(4)", "```\n", "-", "_tag\n",
  };
  simpletir::Rng rng(20240817);
  while (cases.size() < 60) {
    std::string s;
    int n = 3 + static_cast<int>(rng.next_below(8));
    for (int k = 0; k < n; ++k) s += frags[rng.next_below(frags.size())];
    cases.push_back(std::move(s));
  }
  return cases;
}

}  // namespace testutil

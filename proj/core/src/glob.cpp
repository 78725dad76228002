#include <string_view>
#include <vector>

#include "trajmap/ckptstore.hpp"

namespace trajmap {

bool glob_match(std::string_view pattern, std::string_view name) {
  // match[i][j]: pattern[i..] matches name[j..]
  const std::size_t np = pattern.size();
  const std::size_t nn = name.size();
  std::vector<std::vector<char>> match(np + 1, std::vector<char>(nn + 1, 0));
  match[np][nn] = 1;
  for (std::size_t ii = np; ii-- > 0;) {
    const bool double_star = pattern[ii] == '*' && ii + 1 < np && pattern[ii + 1] == '*';
    for (std::size_t jj = nn + 1; jj-- > 0;) {
      bool ok = false;
      if (double_star) {
        ok = match[ii + 2][jj] || (jj < nn && match[ii][jj + 1]);
      } else if (pattern[ii] == '*') {
        ok = match[ii + 1][jj] || (jj < nn && name[jj] != '.' && match[ii][jj + 1]);
      } else if (jj < nn) {
        ok = (pattern[ii] == '?' || pattern[ii] == name[jj]) && match[ii + 1][jj + 1];
      }
      match[ii][jj] = ok ? 1 : 0;
    }
  }
  return match[0][0] != 0;
}

bool SelectionSpec::selects(std::string_view name) const {
  bool included = include_globs.empty();
  for (const auto& g : include_globs) {
    if (glob_match(g, name)) {
      included = true;
      break;
    }
  }
  if (!included) return false;
  for (const auto& g : exclude_globs) {
    if (glob_match(g, name)) return false;
  }
  return true;
}

}  // namespace trajmap

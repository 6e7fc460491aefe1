#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace forgetbench {

/// Lowercases ASCII letters and splits on every non-alphanumeric byte.
/// Empty tokens are dropped. No stemming, no stopwords.
std::vector<std::string> tokenize(std::string_view text);

std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace forgetbench

#pragma once

#include <string>
#include <string_view>

namespace llmreg {

// Correlation category assigned to a feature module with respect to the
// target indicator. Irrelevant modules are dropped from the design matrix.
enum class Category { positive, negative, mixed, irrelevant };

std::string to_string(Category c);
Category category_from_string(std::string_view s);

}  // namespace llmreg

#pragma once

#include <string>

namespace soliton {

// %.12g; JSON summaries and CSV files share this so reruns diff cleanly
std::string format_number(double v);
double round_significant(double v, int digits = 12);

// write to path.tmp then rename over path
void write_text_atomic(const std::string& path, const std::string& content);

}  // namespace soliton

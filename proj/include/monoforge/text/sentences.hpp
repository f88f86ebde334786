#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace monoforge::text {

// Built-in nonbreaking-prefix list (abbreviations whose trailing period
// never ends a sentence) for a language code. Unknown codes get an empty
// list; single-letter initials are nonbreaking regardless.
const std::set<std::string>& nonbreaking_prefixes(const std::string& lang);

// Rule-based sentence segmentation: split after terminal punctuation
// (. ! ? and the dandas । ॥, plus any trailing closers) followed by
// whitespace, unless the word before a period is a nonbreaking prefix or a
// single-letter initial. Sentences come back trimmed; joining them with
// single spaces reproduces the (whitespace-normalized) input.
std::vector<std::string> split_sentences(std::string_view text,
                                         const std::set<std::string>& prefixes);
std::vector<std::string> split_sentences(std::string_view text, const std::string& lang);

// True when the text ends in sentence-terminal punctuation (. ! ? । ॥),
// ignoring trailing whitespace and closing quotes/brackets.
bool ends_with_terminal_punct(std::string_view text);

}  // namespace monoforge::text

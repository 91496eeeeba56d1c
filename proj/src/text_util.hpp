#pragma once

#include <cctype>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace edc2rag::textutil {

inline std::vector<std::string> words(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (char raw : text) {
        unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

inline const std::set<std::string>& stopwords() {
    static const std::set<std::string> kStopwords = {
        "a",    "an",   "the",  "of",   "in",   "on",    "at",    "to",    "for",
        "is",   "are",  "was",  "were", "be",   "been",  "being", "what",  "which",
        "who",  "whom", "when", "where", "why", "how",   "do",    "does",  "did",
        "and",  "or",   "not",  "no",   "it",   "its",   "this",  "that",  "these",
        "those", "by",  "with", "from", "as",   "about", "into",  "than",  "then",
        "there", "their", "they", "he",  "she",  "his",  "her",   "you",   "your",
        "we",   "our",  "i",    "me",   "my",   "also",  "s",     "t"};
    return kStopwords;
}

inline std::vector<std::string> content_words(const std::string& text) {
    std::vector<std::string> out;
    for (auto& w : words(text)) {
        if (!stopwords().count(w)) out.push_back(std::move(w));
    }
    return out;
}

/// Lowercased alphanumeric words joined by single spaces.
inline std::string normalized_text(const std::string& text) {
    std::string out;
    for (const auto& w : words(text)) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

inline std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            if (!current.empty()) {
                out.push_back(current);
                current.clear();
            }
            continue;
        }
        current.push_back(c);
        if (c == '.' || c == '!' || c == '?') {
            // split only at a terminator followed by whitespace, so
            // abbreviations like "U.S." stay inside one sentence
            const bool at_end = i + 1 == text.size();
            const char next = at_end ? ' ' : text[i + 1];
            if (at_end || next == ' ' || next == '\t' || next == '\n' || next == '\r') {
                out.push_back(current);
                current.clear();
            }
        }
    }
    if (!current.empty()) out.push_back(current);
    // trim whitespace
    for (auto& s : out) {
        std::size_t b = s.find_first_not_of(" \t\r");
        std::size_t e = s.find_last_not_of(" \t\r");
        s = (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    }
    std::vector<std::string> nonempty;
    for (auto& s : out) {
        if (!s.empty()) nonempty.push_back(std::move(s));
    }
    return nonempty;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace edc2rag::textutil

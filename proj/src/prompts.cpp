#include "edc2rag/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace edc2rag {

namespace {

bool is_slot_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read template file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

bool is_empty_extract(const std::string& response) {
    std::string trimmed;
    trimmed.reserve(response.size());
    for (char c : response) {
        trimmed.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    auto keep = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == ' ';
    };
    std::string cleaned;
    for (char c : trimmed) {
        if (keep(c)) {
            cleaned.push_back(c);
        } else if (!cleaned.empty() && cleaned.back() != ' ') {
            cleaned.push_back(' ');
        }
    }
    // collapse and trim spaces
    std::istringstream words(cleaned);
    std::string token, normalized;
    while (words >> token) {
        if (!normalized.empty()) normalized.push_back(' ');
        normalized += token;
    }
    return normalized == "no content to extract";
}

std::set<std::string> extract_slots(const std::string& body) {
    std::set<std::string> slots;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < body.size() && is_slot_char(body[j])) ++j;
        if (j > i + 1 && j < body.size() && body[j] == '}') {
            slots.insert(body.substr(i + 1, j - i - 1));
            i = j;
        }
    }
    return slots;
}

PromptTemplate PromptTemplate::from_body(std::string name, std::string body) {
    PromptTemplate tmpl;
    tmpl.name = std::move(name);
    tmpl.required_slots = extract_slots(body);
    tmpl.body = std::move(body);
    return tmpl;
}

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings) {
    const std::set<std::string> slots = extract_slots(tmpl.body);
    for (const auto& [key, _] : bindings) {
        if (!slots.count(key)) {
            throw std::invalid_argument("unknown slot: " + key);
        }
    }
    for (const auto& slot : tmpl.required_slots) {
        if (!bindings.count(slot)) {
            throw std::invalid_argument("unbound slot: " + slot);
        }
    }

    // Single pass over the template; inserted values are never re-scanned.
    std::string out;
    out.reserve(tmpl.body.size());
    for (std::size_t i = 0; i < tmpl.body.size(); ++i) {
        if (tmpl.body[i] == '{') {
            std::size_t j = i + 1;
            while (j < tmpl.body.size() && is_slot_char(tmpl.body[j])) ++j;
            if (j > i + 1 && j < tmpl.body.size() && tmpl.body[j] == '}') {
                const std::string name = tmpl.body.substr(i + 1, j - i - 1);
                auto it = bindings.find(name);
                if (it == bindings.end()) {
                    throw std::invalid_argument("unbound slot: " + name);
                }
                out += it->second;
                i = j;
                continue;
            }
        }
        out.push_back(tmpl.body[i]);
    }
    return out;
}

TemplateLibrary TemplateLibrary::load(const std::filesystem::path& dir) {
    TemplateLibrary lib;
    lib.dir_ = dir;
    if (!std::filesystem::is_directory(dir)) {
        throw std::runtime_error("template directory not found: " + dir.string());
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        const std::string name = entry.path().stem().string();
        lib.templates_.emplace(name, PromptTemplate::from_body(name, read_file(entry.path())));
    }
    const auto fewshot_dir = dir / "fewshots";
    if (std::filesystem::is_directory(fewshot_dir)) {
        for (const auto& entry : std::filesystem::directory_iterator(fewshot_dir)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
            lib.few_shots_.emplace(entry.path().stem().string(), read_file(entry.path()));
        }
    }
    if (lib.templates_.empty()) {
        throw std::runtime_error("no templates found under " + dir.string());
    }
    return lib;
}

const PromptTemplate& TemplateLibrary::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw std::out_of_range("no such template: " + name);
    }
    return it->second;
}

bool TemplateLibrary::has(const std::string& name) const { return templates_.count(name) > 0; }

std::string TemplateLibrary::few_shots(const std::string& name) const {
    auto it = few_shots_.find(name);
    return it == few_shots_.end() ? std::string() : it->second;
}

}  // namespace edc2rag

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

namespace edc2rag {

/// The exact refusal string the compression prompts instruct the model to
/// emit when a cluster holds nothing relevant.
inline constexpr const char* kEmptyExtractSentinel = "No content to extract";

/// True when a model response is the sentinel, tolerating case and
/// surrounding whitespace, quotes, or punctuation.
bool is_empty_extract(const std::string& response);

/// Prompt text with `{slot}` markers. Rendering binds every required slot
/// exactly; unknown binding keys are rejected.
struct PromptTemplate {
    std::string name;
    std::string body;
    std::set<std::string> required_slots;

    static PromptTemplate from_body(std::string name, std::string body);
};

/// Slot names appearing in a template body.
std::set<std::string> extract_slots(const std::string& body);

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings);

/// Task prompt files shipped under prompts/: one per task, plus optional
/// editable few-shot blocks under prompts/fewshots/.
class TemplateLibrary {
public:
    static TemplateLibrary load(const std::filesystem::path& dir);

    const PromptTemplate& get(const std::string& name) const;
    bool has(const std::string& name) const;
    /// Few-shot block for a template, or "" when none is shipped.
    std::string few_shots(const std::string& name) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::map<std::string, PromptTemplate> templates_;
    std::map<std::string, std::string> few_shots_;
};

}  // namespace edc2rag

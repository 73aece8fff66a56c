#pragma once
#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cfcml/errors.hpp"

namespace cfcml::dataio {

inline bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Sentence templates for tabular attributes. Each template has two slots:
// the first takes the attribute name, the second its value.
class TemplateTable {
public:
    // The ten known attributes plus a generic fallback for anything else.
    static TemplateTable builtin() {
        TemplateTable t;
        t.add("management", "The {} for the patient is {}");
        t.add("sex", "The {} of patient is {}");
        t.add("age", "The {} of patient is {}");
        t.add("tumor area", "The {} in the brain is {}.");
        t.add("edema area", "The {} in the brain is {}.");
        t.add("tumor location", "The {} in the brain is {}.");
        t.add("lesion location", "The {} is {}");
        t.add("lesion elevation", "The {} is {}");
        t.add("level of diagnostic difficulty", "The {} is {}");
        t.add("value of apparent diffusion coefficient", "The {} is {}");
        t.fallback_ = "The {} is {}";
        return t;
    }

    void add(std::string name, std::string tmpl) {
        entries_.emplace_back(std::move(name), std::move(tmpl));
    }
    void set_fallback(std::optional<std::string> tmpl) { fallback_ = std::move(tmpl); }
    const std::optional<std::string>& fallback() const { return fallback_; }

    const std::string* find(const std::string& name) const {
        for (const auto& [n, t] : entries_)
            if (n == name) return &t;
        return nullptr;
    }

    std::vector<std::string> known_attributes() const {
        std::vector<std::string> out;
        out.reserve(entries_.size());
        for (const auto& [n, t] : entries_) out.push_back(n);
        return out;
    }

    // Fill both slots. Pure function of (name, value).
    std::string render(const std::string& name, const std::string& value) const {
        if (value.empty() || is_blank(value))
            throw EmptyValue("attribute '" + name + "' has a blank value");
        const std::string* tmpl = find(name);
        if (tmpl == nullptr) {
            if (!fallback_) throw UnknownAttribute("no template for attribute '" + name + "'");
            tmpl = &*fallback_;
        }
        return fill(*tmpl, name, value);
    }

private:
    static std::string fill(const std::string& tmpl, const std::string& a, const std::string& b) {
        std::string out;
        out.reserve(tmpl.size() + a.size() + b.size());
        int slot = 0;
        for (std::size_t i = 0; i < tmpl.size(); ++i) {
            if (i + 1 < tmpl.size() && tmpl[i] == '{' && tmpl[i + 1] == '}') {
                out += (slot == 0) ? a : b;
                ++slot;
                ++i;
            } else {
                out += tmpl[i];
            }
        }
        return out;
    }

    std::vector<std::pair<std::string, std::string>> entries_;
    std::optional<std::string> fallback_;
};

}  // namespace cfcml::dataio

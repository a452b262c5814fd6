// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The buzzdef Authors

#include "buzzdef/templates.hpp"

#include "buzzdef/resources.hpp"

namespace buzzdef::tmpl {

Rendered render(std::string_view tmpl, const Bindings& bindings) {
  Rendered r;
  r.text.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '[') {
      const auto close = tmpl.find(']', i);
      if (close != std::string_view::npos) {
        const auto name = tmpl.substr(i, close - i + 1);
        auto it = bindings.find(name);
        if (it != bindings.end()) {
          SlotSpan s{std::string(name), r.text.size(), 0};
          r.text += it->second;
          s.end = r.text.size();
          r.slots.push_back(std::move(s));
          i = close + 1;
          continue;
        }
      }
    }
    r.text += tmpl[i++];
  }
  return r;
}

std::string unrender(const Rendered& r) {
  std::string out;
  std::size_t at = 0;
  for (const auto& s : r.slots) {
    out.append(r.text, at, s.begin - at);
    out += s.placeholder;
    at = s.end;
  }
  out.append(r.text, at, std::string::npos);
  return out;
}

std::string load_template(const std::optional<std::filesystem::path>& dir, const std::string& name) {
  return load_resource(dir, name);
}

}  // namespace buzzdef::tmpl

#include "epow/parsekit.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "epow/digest.hpp"

namespace epow::parsekit {

namespace {

char lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f';
}

bool is_alnum(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

// Decode the handful of entities that commonly appear inside href values.
std::string decode_entities(std::string_view s) {
  if (s.find('&') == std::string_view::npos) return std::string(s);
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size();) {
    if (s[i] == '&') {
      auto matches = [&](std::string_view ent) {
        return s.substr(i, ent.size()) == ent;
      };
      if (matches("&amp;")) { out += '&'; i += 5; continue; }
      if (matches("&lt;")) { out += '<'; i += 4; continue; }
      if (matches("&gt;")) { out += '>'; i += 4; continue; }
      if (matches("&quot;")) { out += '"'; i += 6; continue; }
      if (matches("&#39;")) { out += '\''; i += 5; continue; }
      if (matches("&apos;")) { out += '\''; i += 6; continue; }
    }
    out += s[i++];
  }
  return out;
}

// Matches "name" at position p as a tag name (preceded decided by caller,
// followed by whitespace, '/', '>' or end).
bool tag_name_at(std::string_view body, size_t p, std::string_view name) {
  if (p + name.size() > body.size()) return false;
  for (size_t i = 0; i < name.size(); ++i)
    if (lower(body[p + i]) != name[i]) return false;
  size_t after = p + name.size();
  if (after == body.size()) return true;
  char c = body[after];
  return is_space(c) || c == '/' || c == '>';
}

// The attribute region of a tag opened at '<': up to the closing '>', or
// the next '<', or end of input. Unclosed tags still give up their hrefs.
std::string_view tag_region(std::string_view body, size_t after_name) {
  size_t end = after_name;
  while (end < body.size() && body[end] != '>' && body[end] != '<') ++end;
  return body.substr(after_name, end - after_name);
}

// First href attribute value inside a tag region, entity-decoded.
// Accepts single-quoted, double-quoted and unquoted values.
std::optional<std::string> find_href(std::string_view region) {
  for (size_t i = 0; i + 4 <= region.size(); ++i) {
    if (lower(region[i]) != 'h' || lower(region[i + 1]) != 'r' ||
        lower(region[i + 2]) != 'e' || lower(region[i + 3]) != 'f')
      continue;
    if (i > 0 && !is_space(region[i - 1])) continue;
    size_t p = i + 4;
    while (p < region.size() && is_space(region[p])) ++p;
    if (p >= region.size() || region[p] != '=') continue;
    ++p;
    while (p < region.size() && is_space(region[p])) ++p;
    if (p >= region.size()) return std::nullopt;
    char quote = region[p];
    if (quote == '"' || quote == '\'') {
      ++p;
      size_t close = region.find(quote, p);
      size_t end = close == std::string_view::npos ? region.size() : close;
      return decode_entities(region.substr(p, end - p));
    }
    size_t end = p;
    while (end < region.size() && !is_space(region[end])) ++end;
    return decode_entities(region.substr(p, end - p));
  }
  return std::nullopt;
}

}  // namespace

std::vector<urlkit::CanonicalUrl> extract_links(
    std::string_view body, const urlkit::CanonicalUrl& base) {
  std::vector<urlkit::CanonicalUrl> links;
  std::unordered_set<std::string> seen;
  urlkit::CanonicalUrl doc_base = base;
  bool base_seen = false;

  for (size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '<') continue;
    if (body.substr(i, 4) == "<!--") {
      size_t close = body.find("-->", i + 4);
      i = close == std::string_view::npos ? body.size() : close + 2;
      continue;
    }
    size_t p = i + 1;
    if (tag_name_at(body, p, "a")) {
      auto href = find_href(tag_region(body, p + 1));
      if (href) {
        auto url = urlkit::resolve(doc_base, *href);
        if (url && seen.insert(url->render()).second) links.push_back(*url);
      }
    } else if (!base_seen && tag_name_at(body, p, "base")) {
      auto href = find_href(tag_region(body, p + 4));
      if (href) {
        auto url = urlkit::resolve(base, *href);
        if (url) {
          doc_base = *url;
          base_seen = true;
        }
      }
    }
  }
  return links;
}

std::string fingerprint(std::string_view body) { return sha256_hex(body); }

namespace {

// Strip tags and comments, then call fn(token) for every lowercased
// alphanumeric run in the remaining text.
template <typename Fn>
void for_each_token(std::string_view body, Fn&& fn) {
  std::string token;
  auto flush = [&] {
    if (!token.empty()) {
      fn(token);
      token.clear();
    }
  };
  for (size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c == '<') {
      flush();
      if (body.substr(i, 4) == "<!--") {
        size_t close = body.find("-->", i + 4);
        i = close == std::string_view::npos ? body.size() : close + 2;
      } else {
        size_t close = body.find('>', i + 1);
        i = close == std::string_view::npos ? body.size() : close;
      }
      continue;
    }
    if (is_alnum(c))
      token.push_back(lower(c));
    else
      flush();
  }
  flush();
}

}  // namespace

double relevance_score(std::string_view body,
                       const std::vector<std::string>& topic) {
  if (topic.empty()) return 1.0;
  std::unordered_set<std::string_view> wanted(topic.begin(), topic.end());
  std::unordered_set<std::string> hits;
  for_each_token(body, [&](const std::string& tok) {
    if (wanted.count(tok)) hits.insert(tok);
  });
  return static_cast<double>(hits.size()) / static_cast<double>(topic.size());
}

size_t count_tokens(std::string_view body) {
  size_t n = 0;
  for_each_token(body, [&](const std::string&) { ++n; });
  return n;
}

PageAnalysis analyze(std::string_view body, const urlkit::CanonicalUrl& base,
                     const std::vector<std::string>& topic) {
  PageAnalysis a;
  a.links = extract_links(body, base);
  a.fingerprint = fingerprint(body);
  a.relevance = relevance_score(body, topic);
  a.token_count = count_tokens(body);
  return a;
}

}  // namespace epow::parsekit

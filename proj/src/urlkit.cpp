#include "epow/urlkit.hpp"

#include <algorithm>
#include <cctype>

namespace epow::urlkit {

namespace {

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}
int hex_val(char c) {
  if (is_digit(c)) return c - '0';
  return (std::tolower(static_cast<unsigned char>(c))) - 'a' + 10;
}
char to_lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

bool is_unreserved(char c) {
  return is_alpha(c) || is_digit(c) || c == '-' || c == '.' || c == '_' || c == '~';
}

bool in_set(char c, const char* set) {
  for (const char* p = set; *p; ++p)
    if (*p == c) return true;
  return false;
}

// Raw characters allowed unescaped per component; anything else is
// percent-encoded so the rendered form is always a transmittable URL.
bool path_char(char c) {
  return is_unreserved(c) || in_set(c, "!$&'()*+,;=:@/");
}
bool query_char(char c) {
  return is_unreserved(c) || in_set(c, "!$'()*+,;:@/?=");
}
bool host_char(char c) {
  return is_unreserved(c) || in_set(c, "!$&'()*+,;=");
}

std::string encode_byte(unsigned char b) {
  static const char* digits = "0123456789ABCDEF";
  return std::string{'%', digits[b >> 4], digits[b & 0xf]};
}

// Percent-normalization: decode escapes of unreserved characters, uppercase
// the hex of the rest, pass invalid escapes through untouched, and encode
// raw bytes outside the component's allowed set. Idempotent.
std::string normalize_component(std::string_view s, bool (*allowed)(char)) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '%' && i + 2 < s.size() && is_hex(s[i + 1]) && is_hex(s[i + 2])) {
      unsigned char b = static_cast<unsigned char>(hex_val(s[i + 1]) * 16 +
                                                   hex_val(s[i + 2]));
      if (is_unreserved(static_cast<char>(b))) {
        out.push_back(static_cast<char>(b));
      } else {
        out += encode_byte(b);
      }
      i += 2;
    } else if (c == '%') {
      out.push_back('%');  // invalid escape, tolerated as-is
    } else if (allowed(c)) {
      out.push_back(c);
    } else {
      out += encode_byte(static_cast<unsigned char>(c));
    }
  }
  return out;
}

// RFC 3986 section 5.2.4.
std::string remove_dot_segments(std::string_view in_view) {
  std::string in(in_view);
  std::string out;
  while (!in.empty()) {
    if (in.rfind("../", 0) == 0) {
      in.erase(0, 3);
    } else if (in.rfind("./", 0) == 0) {
      in.erase(0, 2);
    } else if (in.rfind("/./", 0) == 0) {
      in.replace(0, 3, "/");
    } else if (in == "/.") {
      in = "/";
    } else if (in.rfind("/../", 0) == 0) {
      in.replace(0, 4, "/");
      size_t cut = out.find_last_of('/');
      out.erase(cut == std::string::npos ? 0 : cut);
    } else if (in == "/..") {
      in = "/";
      size_t cut = out.find_last_of('/');
      out.erase(cut == std::string::npos ? 0 : cut);
    } else if (in == "." || in == "..") {
      in.clear();
    } else {
      size_t next = in.find('/', in[0] == '/' ? 1 : 0);
      if (next == std::string::npos) {
        out += in;
        in.clear();
      } else {
        out += in.substr(0, next);
        in.erase(0, next);
      }
    }
  }
  return out;
}

struct RawParts {
  std::optional<std::string> scheme;
  std::optional<std::string> authority;
  std::string path;
  std::optional<std::string> query;
};

// Loose split per RFC 3986 appendix B; fragment is dropped on the floor.
RawParts loose_split(std::string_view text) {
  RawParts p;
  size_t frag = text.find('#');
  if (frag != std::string_view::npos) text = text.substr(0, frag);

  // scheme
  size_t colon = text.find(':');
  if (colon != std::string_view::npos && colon > 0 && is_alpha(text[0])) {
    bool valid = true;
    for (size_t i = 1; i < colon; ++i) {
      char c = text[i];
      if (!is_alpha(c) && !is_digit(c) && c != '+' && c != '-' && c != '.') {
        valid = false;
        break;
      }
    }
    size_t stop = text.find_first_of("/?");
    if (valid && (stop == std::string_view::npos || colon < stop)) {
      std::string s(text.substr(0, colon));
      std::transform(s.begin(), s.end(), s.begin(), to_lower);
      p.scheme = s;
      text = text.substr(colon + 1);
    }
  }

  if (text.rfind("//", 0) == 0) {
    text = text.substr(2);
    size_t end = text.find_first_of("/?");
    p.authority = std::string(text.substr(0, end));
    text = end == std::string_view::npos ? std::string_view{} : text.substr(end);
  }

  size_t q = text.find('?');
  if (q != std::string_view::npos) {
    p.query = std::string(text.substr(q + 1));
    text = text.substr(0, q);
  }
  p.path = std::string(text);
  return p;
}

std::string strip_noise(std::string_view text) {
  // Leading/trailing whitespace and embedded tab/CR/LF (hrefs wrapped
  // across source lines) are removed before parsing.
  size_t b = 0, e = text.size();
  auto is_ws = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f';
  };
  while (b < e && is_ws(text[b])) ++b;
  while (e > b && is_ws(text[e - 1])) --e;
  std::string out;
  out.reserve(e - b);
  for (size_t i = b; i < e; ++i) {
    char c = text[i];
    if (c == '\t' || c == '\r' || c == '\n') continue;
    out.push_back(c);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> canonical_query(
    std::string_view raw) {
  std::vector<std::pair<std::string, std::string>> pairs;
  size_t pos = 0;
  while (pos <= raw.size()) {
    size_t amp = raw.find('&', pos);
    std::string_view piece = raw.substr(
        pos, amp == std::string_view::npos ? std::string_view::npos : amp - pos);
    if (!piece.empty()) {
      size_t eq = piece.find('=');
      std::string_view k = eq == std::string_view::npos ? piece : piece.substr(0, eq);
      std::string_view v =
          eq == std::string_view::npos ? std::string_view{} : piece.substr(eq + 1);
      pairs.emplace_back(normalize_component(k, query_char),
                         normalize_component(v, query_char));
    }
    if (amp == std::string_view::npos) break;
    pos = amp + 1;
  }
  std::stable_sort(pairs.begin(), pairs.end());
  return pairs;
}

UrlResult canonicalize(const RawParts& raw) {
  if (!raw.scheme) return UrlError::MalformedUrl;
  if (*raw.scheme != "http" && *raw.scheme != "https")
    return UrlError::UnsupportedScheme;
  if (!raw.authority) return UrlError::MalformedUrl;

  CanonicalUrl u;
  u.scheme = *raw.scheme;

  std::string_view auth = *raw.authority;
  size_t at = auth.find('@');
  if (at != std::string_view::npos) auth = auth.substr(at + 1);  // drop userinfo

  if (!auth.empty() && auth[0] == '[') return UrlError::MalformedUrl;  // no IPv6

  size_t colon = auth.find(':');
  std::string_view host_part = auth.substr(0, colon);
  if (host_part.empty()) return UrlError::MalformedUrl;
  std::string host = normalize_component(host_part, host_char);
  std::transform(host.begin(), host.end(), host.begin(), to_lower);
  u.host = host;

  if (colon != std::string_view::npos) {
    std::string_view port_part = auth.substr(colon + 1);
    if (!port_part.empty()) {
      uint32_t port = 0;
      for (char c : port_part) {
        if (!is_digit(c)) return UrlError::MalformedUrl;
        port = port * 10 + (c - '0');
        if (port > 65535) return UrlError::MalformedUrl;
      }
      if (port == 0) return UrlError::MalformedUrl;
      uint16_t def = u.scheme == "http" ? 80 : 443;
      if (port != def) u.port = static_cast<uint16_t>(port);
    }
  }

  std::string path = normalize_component(raw.path, path_char);
  path = remove_dot_segments(path);
  if (path.empty())
    path = "/";
  else if (path[0] != '/')
    path = "/" + path;
  u.path = path;

  if (raw.query) u.query = canonical_query(*raw.query);
  return u;
}

}  // namespace

const char* to_string(UrlError e) {
  switch (e) {
    case UrlError::MalformedUrl: return "malformed URL";
    case UrlError::UnsupportedScheme: return "unsupported scheme";
  }
  return "unknown";
}

uint16_t CanonicalUrl::effective_port() const {
  if (port) return *port;
  return scheme == "http" ? 80 : 443;
}

std::string CanonicalUrl::authority() const {
  if (port) return host + ":" + std::to_string(*port);
  return host;
}

std::string CanonicalUrl::render() const {
  std::string s = scheme + "://" + authority() + path;
  if (!query.empty()) {
    s.push_back('?');
    for (size_t i = 0; i < query.size(); ++i) {
      if (i) s.push_back('&');
      s += query[i].first;
      s.push_back('=');
      s += query[i].second;
    }
  }
  return s;
}

UrlResult parse_url(std::string_view text) {
  std::string cleaned = strip_noise(text);
  if (cleaned.empty()) return UrlError::MalformedUrl;
  RawParts raw = loose_split(cleaned);
  if (!raw.scheme) return UrlError::MalformedUrl;
  return canonicalize(raw);
}

UrlResult resolve(const CanonicalUrl& base, std::string_view reference) {
  std::string cleaned = strip_noise(reference);
  RawParts ref = loose_split(cleaned);

  if (ref.scheme) {
    if (*ref.scheme != "http" && *ref.scheme != "https")
      return UrlError::UnsupportedScheme;
    if (ref.authority) return canonicalize(ref);
    // rare "http:path" form: treat as same-authority reference
  }

  RawParts merged;
  merged.scheme = ref.scheme ? *ref.scheme : base.scheme;
  if (ref.authority) {
    merged.authority = ref.authority;
    merged.path = ref.path;
    merged.query = ref.query;
  } else {
    merged.authority = base.authority();
    if (ref.path.empty()) {
      if (!ref.query) {
        // empty reference: the base itself (query and all)
        CanonicalUrl out = base;
        out.scheme = *merged.scheme;
        return out;
      }
      merged.path = base.path;
      merged.query = ref.query;
    } else if (ref.path[0] == '/') {
      merged.path = ref.path;
      merged.query = ref.query;
    } else {
      // merge with all but the last segment of the base path
      size_t cut = base.path.find_last_of('/');
      merged.path = base.path.substr(0, cut + 1) + ref.path;
      merged.query = ref.query;
    }
  }
  return canonicalize(merged);
}

bool SeenSet::check_insert(const CanonicalUrl& url) {
  std::lock_guard lock(mu_);
  return keys_.insert(url.render()).second;
}

bool SeenSet::contains(const CanonicalUrl& url) const {
  std::lock_guard lock(mu_);
  return keys_.count(url.render()) > 0;
}

size_t SeenSet::size() const {
  std::lock_guard lock(mu_);
  return keys_.size();
}

std::vector<std::string> SeenSet::snapshot() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out(keys_.begin(), keys_.end());
  std::sort(out.begin(), out.end());
  return out;
}

void SeenSet::restore(const std::vector<std::string>& keys) {
  std::lock_guard lock(mu_);
  keys_.clear();
  keys_.insert(keys.begin(), keys.end());
}

}  // namespace epow::urlkit

#pragma once

#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "ricci_mon/graph.hpp"

namespace ricci_mon {

class SchemaError : public Error {
public:
  using Error::Error;
};

// Compact JSON with the key order t, seq, vertices, edges.
inline std::string export_snapshot(const AsGraphSnapshot& snap) {
  nlohmann::ordered_json j;
  j["t"] = snap.t();
  j["seq"] = snap.seq();
  j["vertices"] = nlohmann::ordered_json::array();
  for (const auto& v : snap.vertices())
    j["vertices"].push_back({{"asn", v.asn}, {"ctime", v.ctime}, {"prefixes", v.prefix_count}});
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : snap.edges())
    j["edges"].push_back({{"a", e.a}, {"b", e.b}, {"count", e.count}});
  return j.dump();
}

namespace detail {

template <typename T>
T json_int(const nlohmann::json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + "." + key + ": missing field");
  if (!it->is_number_integer())
    throw SchemaError(where + "." + key + ": expected integer, got " + it->type_name());
  if constexpr (std::is_unsigned_v<T>) {
    if (it->is_number_unsigned()) return it->template get<T>();
    if (it->template get<std::int64_t>() < 0)
      throw SchemaError(where + "." + key + ": expected non-negative integer");
  }
  return it->template get<T>();
}

inline const nlohmann::json& json_array(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(std::string(key) + ": missing field");
  if (!it->is_array()) throw SchemaError(std::string(key) + ": expected array, got " + it->type_name());
  return *it;
}

}  // namespace detail

inline AsGraphSnapshot import_snapshot(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("snapshot JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("snapshot: expected object");
  auto t = detail::json_int<Timestamp>(j, "t", "snapshot");
  auto seq = detail::json_int<std::uint64_t>(j, "seq", "snapshot");
  std::vector<AsVertex> vs;
  const auto& jv = detail::json_array(j, "vertices");
  for (std::size_t i = 0; i < jv.size(); ++i) {
    auto where = "vertices[" + std::to_string(i) + "]";
    if (!jv[i].is_object()) throw SchemaError(where + ": expected object");
    vs.push_back({detail::json_int<Asn>(jv[i], "asn", where),
                  detail::json_int<Timestamp>(jv[i], "ctime", where),
                  detail::json_int<std::uint64_t>(jv[i], "prefixes", where)});
  }
  std::vector<AsEdge> es;
  const auto& je = detail::json_array(j, "edges");
  for (std::size_t i = 0; i < je.size(); ++i) {
    auto where = "edges[" + std::to_string(i) + "]";
    if (!je[i].is_object()) throw SchemaError(where + ": expected object");
    es.push_back({detail::json_int<Asn>(je[i], "a", where), detail::json_int<Asn>(je[i], "b", where),
                  detail::json_int<std::uint64_t>(je[i], "count", where)});
    if (es.back().a >= es.back().b) throw SchemaError(where + ": expected a < b");
  }
  try {
    return AsGraphSnapshot(t, seq, std::move(vs), std::move(es));
  } catch (const SchemaError&) {
    throw;
  } catch (const Error& e) {
    throw SchemaError(std::string("snapshot: ") + e.what());
  }
}

// Legacy GML reader. Nodes take their ASN from an `asn` key, else a numeric
// `label`, else `id`; edges reference node ids. `ctime`, `prefixes` and
// `count` are optional and default to 0.
inline AsGraphSnapshot import_gml(std::string_view text, Timestamp t = 0, std::uint64_t seq = 0) {
  struct Token {
    std::string text;
    int line;
  };
  std::vector<Token> toks;
  int line = 1;
  for (std::size_t i = 0; i < text.size();) {
    char c = text[i];
    if (c == '\n') { ++line; ++i; continue; }
    if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
    if (c == '#') { while (i < text.size() && text[i] != '\n') ++i; continue; }
    if (c == '[' || c == ']') { toks.push_back({std::string(1, c), line}); ++i; continue; }
    if (c == '"') {
      auto end = text.find('"', i + 1);
      if (end == std::string_view::npos) throw SchemaError("GML line " + std::to_string(line) + ": unterminated string");
      toks.push_back({std::string(text.substr(i, end - i + 1)), line});
      i = end + 1;
      continue;
    }
    auto start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) && text[i] != '[' && text[i] != ']') ++i;
    toks.push_back({std::string(text.substr(start, i - start)), line});
  }

  auto as_int = [](const Token& tk) -> long long {
    std::string s = tk.text;
    if (s.size() >= 2 && s.front() == '"') s = s.substr(1, s.size() - 2);
    try {
      std::size_t used = 0;
      auto v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw SchemaError("GML line " + std::to_string(tk.line) + ": expected integer, got '" + tk.text + "'");
    }
  };

  using Attrs = std::map<std::string, Token>;
  std::size_t pos = 0;
  auto read_block = [&](int open_line) {
    Attrs attrs;
    if (pos >= toks.size() || toks[pos].text != "[")
      throw SchemaError("GML line " + std::to_string(open_line) + ": expected '['");
    ++pos;
    while (pos < toks.size() && toks[pos].text != "]") {
      if (pos + 1 >= toks.size()) break;
      if (toks[pos + 1].text == "[") {  // nested block we don't use
        int depth = 0;
        ++pos;
        do {
          if (toks[pos].text == "[") ++depth;
          if (toks[pos].text == "]") --depth;
          ++pos;
        } while (pos < toks.size() && depth > 0);
        continue;
      }
      attrs.insert_or_assign(toks[pos].text, toks[pos + 1]);
      pos += 2;
    }
    if (pos >= toks.size()) throw SchemaError("GML line " + std::to_string(open_line) + ": unterminated block");
    ++pos;
    return attrs;
  };

  while (pos < toks.size() && toks[pos].text != "graph") ++pos;
  if (pos == toks.size()) throw SchemaError("GML: no graph block");
  int graph_line = toks[pos].line;
  ++pos;
  if (pos >= toks.size() || toks[pos].text != "[") throw SchemaError("GML line " + std::to_string(graph_line) + ": expected '['");
  ++pos;
  std::map<long long, Asn> id_to_asn;
  std::vector<AsVertex> vs;
  std::vector<std::pair<Attrs, int>> raw_edges;
  while (pos < toks.size() && toks[pos].text != "]") {
    const auto& key = toks[pos];
    ++pos;
    if (key.text == "node") {
      auto attrs = read_block(key.line);
      if (!attrs.contains("id")) throw SchemaError("GML line " + std::to_string(key.line) + ": node without id");
      auto id = as_int(attrs.at("id"));
      long long asn = id;
      if (attrs.contains("asn")) asn = as_int(attrs.at("asn"));
      else if (attrs.contains("label")) {
        try { asn = as_int(attrs.at("label")); } catch (const SchemaError&) {}
      }
      if (asn <= 0) throw SchemaError("GML line " + std::to_string(key.line) + ": invalid ASN");
      id_to_asn[id] = static_cast<Asn>(asn);
      vs.push_back({static_cast<Asn>(asn), attrs.contains("ctime") ? as_int(attrs.at("ctime")) : 0,
                    attrs.contains("prefixes") ? static_cast<std::uint64_t>(as_int(attrs.at("prefixes"))) : 0});
    } else if (key.text == "edge") {
      raw_edges.emplace_back(read_block(key.line), key.line);
    } else if (pos < toks.size() && toks[pos].text == "[") {
      read_block(key.line);
    } else {
      ++pos;  // scalar graph attribute
    }
  }
  std::vector<AsEdge> es;
  for (auto& [attrs, ln] : raw_edges) {
    if (!attrs.contains("source") || !attrs.contains("target"))
      throw SchemaError("GML line " + std::to_string(ln) + ": edge needs source and target");
    auto s = id_to_asn.find(as_int(attrs.at("source")));
    auto d = id_to_asn.find(as_int(attrs.at("target")));
    if (s == id_to_asn.end() || d == id_to_asn.end())
      throw SchemaError("GML line " + std::to_string(ln) + ": edge references unknown node");
    if (s->second == d->second) continue;
    auto count = attrs.contains("count") ? static_cast<std::uint64_t>(as_int(attrs.at("count"))) : 0;
    auto [a, b] = edge_key(s->second, d->second);
    es.push_back({a, b, count});
  }
  // GML graphs may list a link in both directions; keep the first.
  std::sort(es.begin(), es.end(), [](const AsEdge& l, const AsEdge& r) { return std::pair{l.a, l.b} < std::pair{r.a, r.b}; });
  es.erase(std::unique(es.begin(), es.end(), [](const AsEdge& l, const AsEdge& r) { return l.a == r.a && l.b == r.b; }), es.end());
  try {
    return AsGraphSnapshot(t, seq, std::move(vs), std::move(es));
  } catch (const Error& e) {
    throw SchemaError(std::string("GML: ") + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Dispatches on content: JSON object vs GML.
inline AsGraphSnapshot load_snapshot_file(const std::string& path) {
  auto text = read_file(path);
  auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return import_snapshot(text);
  return import_gml(text);
}

}  // namespace ricci_mon

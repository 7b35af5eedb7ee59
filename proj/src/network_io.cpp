#include "gasflow/network_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gasflow/tolerances.hpp"

namespace gasflow {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& msg) {
  throw GasFlowError(ErrorCode::Schema, "schema violation: " + msg);
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw GasFlowError(ErrorCode::Parse, std::string("syntax error at byte ") +
                                             std::to_string(e.byte) + ": " + e.what());
  }
}

void check_version(const json& doc) {
  if (!doc.is_object()) schema_error("top level must be an object");
  if (auto it = doc.find("format_version"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<int>() != kFormatVersion)
      schema_error("unsupported format_version");
  }
}

// Ids may be written as strings or integers.
std::string id_of(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  schema_error(where + ": id must be a string or integer");
}

double number_field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where + ": missing '" + key + "'");
  if (!it->is_number()) schema_error(where + ": '" + key + "' must be a number");
  return it->get<double>();
}

}  // namespace

GasNetwork parse_network(std::string_view text) {
  json doc = parse_json(text);
  check_version(doc);

  GasNetwork net;
  auto nodes = doc.find("nodes");
  if (nodes == doc.end() || !nodes->is_array()) schema_error("'nodes' must be an array");
  for (const json& n : *nodes) {
    if (n.is_object() && !n.contains("id")) schema_error("node missing 'id'");
    std::string id = id_of(n.is_object() ? n["id"] : n, "node");
    if (net.find_node(id))
      throw GasFlowError(ErrorCode::DuplicateId, "duplicate id: node '" + id + "'");
    net.add_node(id);
  }

  auto edges = doc.find("edges");
  if (edges == doc.end() || !edges->is_array()) schema_error("'edges' must be an array");
  std::size_t index = 0;
  for (const json& e : *edges) {
    if (!e.is_object()) schema_error("edge must be an object");
    std::string where = "edge #" + std::to_string(index++);
    std::string id = e.contains("id") ? id_of(e["id"], where) : where;
    if (net.find_edge(id))
      throw GasFlowError(ErrorCode::DuplicateId, "duplicate id: edge '" + id + "'");
    if (!e.contains("from") || !e.contains("to")) schema_error(where + ": missing endpoint");
    std::string from = id_of(e["from"], where), to = id_of(e["to"], where);
    auto m = net.find_node(from), n = net.find_node(to);
    if (!m || !n)
      throw GasFlowError(ErrorCode::DanglingEndpoint,
                         "dangling endpoint: edge '" + id + "' references unknown node '" +
                             (!m ? from : to) + "'");
    std::string type = e.value("type", std::string("pipe"));
    if (type == "pipe") {
      net.add_pipe(id, *m, *n, number_field(e, "a", where));
    } else if (type == "compressor") {
      net.add_compressor(id, *m, *n, number_field(e, "alpha", where));
    } else if (type == "noideal_compressor") {
      net.add_nonideal_compressor(id, *m, *n, number_field(e, "a", where),
                                  number_field(e, "alpha", where));
    } else {
      schema_error(where + ": unknown type '" + type + "'");
    }
  }

  auto ref = doc.find("reference");
  if (ref == doc.end() || !ref->is_object() || !ref->contains("node"))
    schema_error("missing 'reference'");
  std::string ref_id = id_of((*ref)["node"], "reference");
  auto r = net.find_node(ref_id);
  if (!r)
    throw GasFlowError(ErrorCode::DanglingEndpoint,
                       "dangling endpoint: reference node '" + ref_id + "' is unknown");
  net.set_reference(*r, number_field(*ref, "psi", "reference"));

  GasNetwork normalized = normalize_compressors(net);
  ValidationReport report = validate(normalized);
  if (!report.ok())
    throw GasFlowError(ErrorCode::InvalidNetwork, "invalid network: " + report.summary());
  return normalized;
}

std::string serialize_network(const GasNetwork& net) {
  json doc;
  doc["format_version"] = kFormatVersion;
  json nodes = json::array();
  for (const std::string& name : net.node_names()) nodes.push_back({{"id", name}});
  doc["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const Edge& e : net.edges()) {
    json je = {{"id", e.name},
               {"from", net.node_name(e.from)},
               {"to", net.node_name(e.to)},
               {"type", to_string(e.kind)}};
    if (e.kind != EdgeKind::Compressor) je["a"] = e.friction;
    if (e.kind != EdgeKind::Pipe) je["alpha"] = e.ratio;
    edges.push_back(std::move(je));
  }
  doc["edges"] = std::move(edges);
  doc["reference"] = {{"node", net.node_name(net.reference_node())}, {"psi", net.reference_psi()}};
  return doc.dump(2) + "\n";
}

Injections parse_scenario(std::string_view text, const GasNetwork& net, bool require_balanced) {
  json doc = parse_json(text);
  check_version(doc);
  auto inj = doc.find("injections");
  if (inj == doc.end() || !inj->is_object()) schema_error("'injections' must be an object");
  Injections q{std::vector<double>(net.num_nodes(), 0.0)};
  for (auto it = inj->begin(); it != inj->end(); ++it) {
    auto n = net.find_node(it.key());
    if (!n)
      throw GasFlowError(ErrorCode::DanglingEndpoint,
                         "dangling endpoint: injection at unknown node '" + it.key() + "'");
    if (!it->is_number()) schema_error("injection at '" + it.key() + "' must be a number");
    q.q[*n] = it->get<double>();
  }
  if (require_balanced && !q.balanced(tol::kBalance)) {
    std::ostringstream os;
    os << "unbalanced injections: sum = " << q.imbalance();
    throw GasFlowError(ErrorCode::Unbalanced, os.str());
  }
  return q;
}

std::string serialize_scenario(const GasNetwork& net, const Injections& q) {
  json doc;
  doc["format_version"] = kFormatVersion;
  json inj = json::object();
  for (NodeId n = 0; n < net.num_nodes(); ++n) inj[net.node_name(n)] = q.q.at(n);
  doc["injections"] = std::move(inj);
  return doc.dump(2) + "\n";
}

std::vector<double> parse_pressures(std::string_view text, const GasNetwork& net) {
  json doc = parse_json(text);
  check_version(doc);
  auto psi = doc.find("psi");
  if (psi == doc.end() || !psi->is_object()) schema_error("'psi' must be an object");
  std::vector<double> out(net.num_nodes(), net.reference_psi());
  for (auto it = psi->begin(); it != psi->end(); ++it) {
    auto n = net.find_node(it.key());
    if (!n)
      throw GasFlowError(ErrorCode::DanglingEndpoint,
                         "dangling endpoint: pressure at unknown node '" + it.key() + "'");
    if (!it->is_number()) schema_error("pressure at '" + it.key() + "' must be a number");
    out[*n] = it->get<double>();
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GasFlowError(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw GasFlowError(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw GasFlowError(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

GasNetwork load_network(const std::filesystem::path& path) {
  return parse_network(read_text_file(path));
}

Injections load_scenario(const std::filesystem::path& path, const GasNetwork& net) {
  return parse_scenario(read_text_file(path), net);
}

}  // namespace gasflow

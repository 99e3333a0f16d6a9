#include "dal/wire.hpp"

#include <arpa/inet.h>
#include <csignal>
#include <netinet/in.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

namespace dal {

using nlohmann::json;

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

json error_reply(const std::string& message) { return {{"ok", false}, {"error", message}}; }

void write_all(int fd, const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::send(fd, data.data() + done, data.size() - done, MSG_NOSIGNAL);
    if (n < 0 && errno == ENOTSOCK) {
      const ssize_t w = ::write(fd, data.data() + done, data.size() - done);
      if (w <= 0) throw IoError("write failed: " + std::string(std::strerror(errno)));
      done += std::size_t(w);
      continue;
    }
    if (n <= 0) throw IoError("send failed: " + std::string(std::strerror(errno)));
    done += std::size_t(n);
  }
}

/// Reads one newline-terminated line from fd; false on end of stream.
bool read_line(int fd, std::string& buffer, std::string& line) {
  for (;;) {
    const auto pos = buffer.find('\n');
    if (pos != std::string::npos) {
      line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      return true;
    }
    char chunk[4096];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    buffer.append(chunk, std::size_t(n));
  }
}

std::vector<int> geometry_shape(const GridGeometry& g) { return {g.headings, g.rows, g.cols}; }

json geometry_json(const GridGeometry& g) {
  return {{"theta", g.headings}, {"n", g.rows}, {"m", g.cols}, {"cell_px", g.cell_px},
          {"resolution", g.resolution}};
}

Tensor scan_tensor(const Scan& scan) {
  Tensor t;
  t.shape = {scan.beams()};
  t.data.resize(std::size_t(scan.beams()));
  for (int i = 0; i < scan.beams(); ++i) t.data[std::size_t(i)] = float(scan.ranges[i]);
  return t;
}

}  // namespace

std::string base64_encode(const std::uint8_t* data, std::size_t size) {
  std::string out;
  out.reserve((size + 2) / 3 * 4);
  for (std::size_t i = 0; i < size; i += 3) {
    const std::uint32_t b0 = data[i];
    const std::uint32_t b1 = i + 1 < size ? data[i + 1] : 0;
    const std::uint32_t b2 = i + 2 < size ? data[i + 2] : 0;
    const std::uint32_t v = (b0 << 16) | (b1 << 8) | b2;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += i + 1 < size ? kAlphabet[(v >> 6) & 63] : '=';
    out += i + 2 < size ? kAlphabet[v & 63] : '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw InputError("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int v[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + std::size_t(k)];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        v[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0 || (v[k] = decode_char(c)) < 0) throw InputError("invalid base64 input");
    }
    const std::uint32_t bits = (std::uint32_t(v[0]) << 18) | (std::uint32_t(v[1]) << 12) |
                               (std::uint32_t(v[2]) << 6) | std::uint32_t(v[3]);
    out.push_back(std::uint8_t(bits >> 16));
    if (pad < 2) out.push_back(std::uint8_t(bits >> 8));
    if (pad < 1) out.push_back(std::uint8_t(bits));
  }
  return out;
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (const int d : shape) n *= std::size_t(d);
  return n;
}

json encode_tensor(const Tensor& t) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  if (t.element_count() != t.data.size()) throw ParameterError("tensor shape does not match data");
  return {{"dtype", "float32"},
          {"shape", t.shape},
          {"data", base64_encode(reinterpret_cast<const std::uint8_t*>(t.data.data()),
                                 t.data.size() * sizeof(float))}};
}

Tensor decode_tensor(const json& j) {
  if (!j.is_object() || j.value("dtype", "") != "float32")
    throw InputError("tensor must be a float32 object");
  Tensor t;
  t.shape = j.at("shape").get<std::vector<int>>();
  for (const int d : t.shape)
    if (d < 0) throw InputError("negative tensor dimension");
  const auto bytes = base64_decode(j.at("data").get<std::string>());
  if (bytes.size() != t.element_count() * sizeof(float))
    throw InputError("tensor payload size does not match its shape");
  t.data.resize(t.element_count());
  std::memcpy(t.data.data(), bytes.data(), bytes.size());
  return t;
}

Tensor to_tensor(const PoseTensor<double>& values) {
  Tensor t;
  t.shape = {values.headings(), values.rows(), values.cols()};
  t.data.resize(std::size_t(values.values().size()));
  Eigen::Map<Eigen::VectorXf>(t.data.data(), values.values().size()) = values.values().cast<float>();
  return t;
}

Tensor to_tensor(const Image& image) {
  Tensor t;
  t.shape = {int(image.rows()), int(image.cols())};
  t.data.assign(image.data(), image.data() + image.size());
  return t;
}

Tensor to_tensor(const Raster& raster) { return to_tensor(Image(raster.cast<float>())); }

std::uint64_t checksum(const Tensor& t) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(t.data.data());
  for (std::size_t i = 0; i < t.data.size() * sizeof(float); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

json encode_observation(const Observation& obs) {
  const Tensor belief = to_tensor(obs.belief.values);
  return {{"belief", encode_tensor(belief)},
          {"belief_checksum", checksum(belief)},
          {"map", encode_tensor(to_tensor(obs.low_res_map))},
          {"scan", encode_tensor(to_tensor(obs.low_res_scan))}};
}

json encode_info(const StepInfo& info) {
  auto cell = [](const CellPose& p) { return json::array({p.heading, p.row, p.col}); };
  return {{"step", info.step},
          {"true_cell", cell(info.true_cell)},
          {"believed_cell", cell(info.believed_cell)},
          {"true_pose", {info.true_pose.x, info.true_pose.y, info.true_pose.heading}},
          {"wasserstein", info.wasserstein},
          {"belief_at_true", info.belief_at_true},
          {"hit", info.hit},
          {"degenerate", info.degenerate}};
}

EnvServer::EnvServer(WorldSource source, EpisodeConfig cfg, std::string default_map_id,
                     std::shared_ptr<const LikelihoodProvider> coarse)
    : source_(std::move(source)), cfg_(std::move(cfg)), default_map_id_(std::move(default_map_id)),
      coarse_(std::move(coarse)) {
  if (!source_) throw ConfigurationError("server needs a world source");
  auto world = source_(default_map_id_);
  if (!world) throw MapError("unknown map id: " + default_map_id_);
  geometry_ = world->truth.geometry;
  worlds_[default_map_id_] = std::move(world);
}

json EnvServer::reset(const json& request) {
  const auto seed = request.value("seed", std::uint64_t{0});
  std::string id = default_map_id_;
  if (request.contains("map_id") && !request["map_id"].is_null())
    id = request["map_id"].is_string() ? request["map_id"].get<std::string>()
                                       : request["map_id"].dump();
  auto it = worlds_.find(id);
  if (it == worlds_.end()) {
    auto world = source_(id);
    if (!world) throw MapError("unknown map id: " + id);
    const auto& g = world->truth.geometry;
    if (g.headings != geometry_.headings || g.rows != geometry_.rows || g.cols != geometry_.cols)
      throw MapError("map " + id + " does not match the advertised geometry");
    it = worlds_.emplace(id, std::move(world)).first;
  }
  episode_ = std::make_unique<Episode>(it->second, cfg_, coarse_);
  const Observation obs = episode_->reset(seed);
  return {{"ok", true}, {"observation", encode_observation(obs)},
          {"info", encode_info(episode_->metrics())}};
}

json EnvServer::step(const json& request) {
  if (!episode_) throw EpisodeFinishedError("no active episode; send reset first");
  const json& a = request.at("action");
  if (!a.is_number_integer()) throw InputError("action must be 0, 1 or 2");
  const int index = a.get<int>();
  const StepResult r = episode_->step(action_from_index(index));
  return {{"ok", true},
          {"observation", encode_observation(r.observation)},
          {"reward", r.reward},
          {"done", r.done},
          {"info", encode_info(r.info)}};
}

json EnvServer::handle(const json& request) {
  try {
    if (!request.is_object() || !request.contains("cmd") || !request["cmd"].is_string())
      return error_reply("request must be an object with a string cmd");
    const std::string cmd = request["cmd"];
    if (cmd == "hello")
      return {{"ok", true}, {"version", kProtocolVersion}, {"geometry", geometry_json(geometry_)},
              {"shape", geometry_shape(geometry_)}};
    if (cmd == "reset") return reset(request);
    if (cmd == "step") return step(request);
    if (cmd == "close") {
      closed_ = true;
      episode_.reset();
      return {{"ok", true}};
    }
    return error_reply("unknown cmd: " + cmd);
  } catch (const std::exception& e) {
    return error_reply(e.what());
  }
}

std::string EnvServer::handle_line(const std::string& line) {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::exception& e) {
    return error_reply(std::string("malformed request: ") + e.what()).dump();
  }
  return handle(request).dump();
}

void serve_stream(EnvServer& server, std::istream& in, std::ostream& out) {
  std::string line;
  while (!server.closed() && std::getline(in, line)) {
    if (line.empty()) continue;
    out << server.handle_line(line) << '\n' << std::flush;
  }
}

void serve_tcp(const std::string& address, const std::function<EnvServer()>& make_server,
               int max_connections) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw ParameterError("address must be host:port");
  const std::string host = address.substr(0, colon);
  const int port = std::stoi(address.substr(colon + 1));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(std::uint16_t(port));
  if (::inet_pton(AF_INET, host.empty() ? "127.0.0.1" : host.c_str(), &addr.sin_addr) != 1)
    throw ParameterError("invalid IPv4 address: " + host);

  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw IoError("socket failed");
  const int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listener, 1) != 0) {
    ::close(listener);
    throw IoError("cannot listen on " + address + ": " + std::strerror(errno));
  }

  for (int served = 0; max_connections <= 0 || served < max_connections; ++served) {
    const int client = ::accept(listener, nullptr, nullptr);
    if (client < 0) continue;
    EnvServer server = make_server();
    std::string buffer, line;
    try {
      while (!server.closed() && read_line(client, buffer, line)) {
        if (line.empty()) continue;
        write_all(client, server.handle_line(line) + "\n");
      }
    } catch (const IoError&) {
      // client went away; wait for the next one
    }
    ::close(client);
  }
  ::close(listener);
}

ProcessChannel::ProcessChannel(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ParameterError("empty command");
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) throw IoError("pipe failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw IoError("pipe failed");
  }
  std::signal(SIGPIPE, SIG_IGN);
  pid_ = ::fork();
  if (pid_ < 0) throw IoError("fork failed");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ProcessChannel::~ProcessChannel() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) ::waitpid(pid_, nullptr, 0);
}

json ProcessChannel::request(const json& message) {
  write_all(to_child_, message.dump() + "\n");
  std::string line;
  if (!read_line(from_child_, buffer_, line)) throw IoError("external model closed its output");
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed reply from external model: ") + e.what());
  }
}

namespace {

json checked_reply(MessageChannel& channel, const json& message) {
  json reply = channel.request(message);
  if (!reply.is_object() || !reply.value("ok", false))
    throw InputError("external model error: " +
                     (reply.is_object() ? reply.value("error", std::string("no error text"))
                                        : std::string("reply is not an object")));
  return reply;
}

}  // namespace

ActionDistribution RemotePolicyProvider::distribution(const PolicyInput& input) const {
  const json reply = checked_reply(
      *channel_, {{"cmd", "policy_query"},
                  {"belief", encode_tensor(to_tensor(input.belief.values))},
                  {"map", encode_tensor(to_tensor(input.low_res_map))},
                  {"scan", encode_tensor(to_tensor(input.low_res_scan))}});
  const auto probs = reply.at("probs").get<std::vector<double>>();
  if (probs.size() != 3) throw InputError("policy reply must hold three probabilities");
  const ActionDistribution d{probs[0], probs[1], probs[2]};
  if (!is_distribution(d, 1e-5)) throw InputError("policy reply is not a distribution");
  return d;
}

LikelihoodGrid RemoteLikelihoodProvider::coarse(const GridMap& map, const Scan& scan) const {
  const auto& g = map.geometry;
  const json reply = checked_reply(*channel_, {{"cmd", "likelihood_query"},
                                               {"level", 0},
                                               {"map", encode_tensor(to_tensor(map.occupancy))},
                                               {"scan", encode_tensor(scan_tensor(scan))}});
  const Tensor t = decode_tensor(reply.at("likelihood"));
  if (t.shape != geometry_shape(g)) throw InputError("likelihood reply has the wrong shape");
  LikelihoodGrid lik;
  lik.values = PoseTensor<double>(g.headings, g.rows, g.cols);
  lik.values.values() =
      Eigen::Map<const Eigen::VectorXf>(t.data.data(), Eigen::Index(t.data.size())).cast<double>();
  const double total = lik.values.sum();
  if (!(lik.values.values().array() >= 0.0).all() || !(total > 0.0) || !std::isfinite(total))
    throw InputError("likelihood reply is not a distribution");
  lik.values.values() /= total;
  return lik;
}

Eigen::MatrixXd RemoteLikelihoodProvider::fine_block(const BlockQuery& query) const {
  const json reply = checked_reply(
      *channel_, {{"cmd", "likelihood_query"},
                  {"level", 1},
                  {"k", query.k},
                  {"cell", {query.cell.heading, query.cell.row, query.cell.col}},
                  {"map", encode_tensor(to_tensor(query.map_crop))},
                  {"scan", encode_tensor(to_tensor(query.scan_crop))}});
  const Tensor t = decode_tensor(reply.at("likelihood"));
  if (t.shape != std::vector<int>{query.k, query.k})
    throw InputError("fine likelihood reply has the wrong shape");
  Eigen::MatrixXd block(query.k, query.k);
  for (int r = 0; r < query.k; ++r)
    for (int c = 0; c < query.k; ++c) block(r, c) = t.data[std::size_t(r * query.k + c)];
  const double total = block.sum();
  if (!(block.array() >= 0.0).all() || !(total > 0.0) || !std::isfinite(total))
    throw InputError("fine likelihood reply is not a distribution");
  return block / total;
}

}  // namespace dal

#pragma once

#include "dal/env.hpp"

#include <json.hpp>

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace dal {

inline constexpr int kProtocolVersion = 1;

std::string base64_encode(const std::uint8_t* data, std::size_t size);
std::vector<std::uint8_t> base64_decode(const std::string& text);

/// Float32 little-endian tensor: {"dtype": "float32", "shape": [...], "data": base64}.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  std::size_t element_count() const;
};

nlohmann::json encode_tensor(const Tensor& t);
Tensor decode_tensor(const nlohmann::json& j);

Tensor to_tensor(const PoseTensor<double>& values);
Tensor to_tensor(const Image& image);
Tensor to_tensor(const Raster& raster);

/// FNV-1a over the float32 bytes of a tensor; lets clients compare beliefs.
std::uint64_t checksum(const Tensor& t);

nlohmann::json encode_observation(const Observation& obs);
nlohmann::json encode_info(const StepInfo& info);

/// Resolves a map id from a reset request to a world.
using WorldSource = std::function<std::shared_ptr<const World>(const std::string& map_id)>;

/// Stateful request handler for one client. Requests are JSON objects with a
/// "cmd" of hello, reset, step or close; every request gets one reply and
/// failures reply {"ok": false, "error": ...}.
class EnvServer {
 public:
  EnvServer(WorldSource source, EpisodeConfig cfg, std::string default_map_id,
            std::shared_ptr<const LikelihoodProvider> coarse = nullptr);

  nlohmann::json handle(const nlohmann::json& request);
  /// Parses and handles one line; malformed input yields an error reply.
  std::string handle_line(const std::string& line);
  bool closed() const { return closed_; }

 private:
  nlohmann::json reset(const nlohmann::json& request);
  nlohmann::json step(const nlohmann::json& request);

  WorldSource source_;
  EpisodeConfig cfg_;
  std::string default_map_id_;
  std::shared_ptr<const LikelihoodProvider> coarse_;
  std::map<std::string, std::shared_ptr<const World>> worlds_;
  std::unique_ptr<Episode> episode_;
  GridGeometry geometry_;
  bool closed_ = false;
};

/// Serves newline-delimited requests until close or end of input.
void serve_stream(EnvServer& server, std::istream& in, std::ostream& out);

/// Listens on host:port and serves one connection at a time, each with a
/// fresh server from `make_server`. Returns after `max_connections` clients
/// when it is positive.
void serve_tcp(const std::string& address, const std::function<EnvServer()>& make_server,
               int max_connections = 0);

/// Request/reply transport to an external model.
class MessageChannel {
 public:
  virtual ~MessageChannel() = default;
  virtual nlohmann::json request(const nlohmann::json& message) = 0;
};

/// Channel over a child process's stdin/stdout, one JSON line each way.
class ProcessChannel final : public MessageChannel {
 public:
  explicit ProcessChannel(const std::vector<std::string>& argv);
  ~ProcessChannel() override;
  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  nlohmann::json request(const nlohmann::json& message) override;

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// In-process channel that hands messages to a function; used in tests.
class FunctionChannel final : public MessageChannel {
 public:
  explicit FunctionChannel(std::function<nlohmann::json(const nlohmann::json&)> fn)
      : fn_(std::move(fn)) {}
  nlohmann::json request(const nlohmann::json& message) override { return fn_(message); }

 private:
  std::function<nlohmann::json(const nlohmann::json&)> fn_;
};

/// Policy answered by an external model ("policy_query").
class RemotePolicyProvider final : public PolicyProvider {
 public:
  explicit RemotePolicyProvider(std::shared_ptr<MessageChannel> channel)
      : channel_(std::move(channel)) {}
  ActionDistribution distribution(const PolicyInput& input) const override;
  std::string name() const override { return "external"; }

 private:
  std::shared_ptr<MessageChannel> channel_;
};

/// Likelihood answered by an external model ("likelihood_query").
class RemoteLikelihoodProvider final : public LikelihoodProvider {
 public:
  explicit RemoteLikelihoodProvider(std::shared_ptr<MessageChannel> channel)
      : channel_(std::move(channel)) {}
  LikelihoodGrid coarse(const GridMap& map, const Scan& scan) const override;
  Eigen::MatrixXd fine_block(const BlockQuery& query) const override;

 private:
  std::shared_ptr<MessageChannel> channel_;
};

}  // namespace dal

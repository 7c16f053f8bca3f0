#pragma once

#include "pedeval/annotate.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace pedeval {

struct ApiRequest {
    std::string method;  ///< "GET" or "POST"
    std::string path;
    std::map<std::string, std::string> query;
    std::map<std::string, std::string> headers;  ///< lower-case names
    std::string body;
};

struct ApiResponse {
    int status{200};
    nlohmann::ordered_json body;
};

/// Routes one API call. Errors come back as {"error": {"kind", "message"}}
/// with 404 for unknown entities, 409 for conflicts and 422 for invalid
/// input. Never throws for library errors.
ApiResponse handle_api(AnnotationService& service, const ApiRequest& req);

nlohmann::ordered_json milestone_json(const MilestoneStatus& status);
nlohmann::ordered_json progress_json(const Progress& p);

/// HTTP front end over handle_api, with an optional static mount for the
/// rater UI at "/".
class AnnotationServer {
public:
    AnnotationServer(AnnotationService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~AnnotationServer();
    AnnotationServer(const AnnotationServer&) = delete;
    AnnotationServer& operator=(const AnnotationServer&) = delete;

    /// Binds to `port` (0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void serve();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace pedeval

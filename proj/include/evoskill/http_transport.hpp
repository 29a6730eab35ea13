#pragma once

#include <stdexcept>
#include <string>

#include <httplib.h>

#include "evoskill/gateway.hpp"

namespace evoskill {

// base_url is e.g. "https://host:port/v1"; the request path is appended to
// any path prefix the base_url carries.
class HttplibTransport : public HttpTransport {
public:
    HttpResponse post(const std::string& base_url, const std::string& path,
                      const std::map<std::string, std::string>& headers,
                      const std::string& body) override {
        auto scheme_end = base_url.find("://");
        if (scheme_end == std::string::npos)
            throw std::runtime_error("base_url is not absolute: " + base_url);
        auto path_start = base_url.find('/', scheme_end + 3);
        std::string origin =
            path_start == std::string::npos ? base_url : base_url.substr(0, path_start);
        std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
        if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

        httplib::Client client(origin);
        client.set_connection_timeout(10);
        client.set_read_timeout(120);
        httplib::Headers h(headers.begin(), headers.end());
        auto res = client.Post(prefix + path, h, body, "application/json");
        if (!res) throw std::runtime_error("transport error: " + httplib::to_string(res.error()));
        return {res->status, res->body};
    }
};

}  // namespace evoskill

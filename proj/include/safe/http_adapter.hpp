#pragma once

// Binds a wire handler onto an httplib server. Routes are registered per
// method with a catch-all pattern so the wire layer keeps doing its own
// routing and the bytes match the in-process transport exactly.

#include <functional>
#include <string>

#include <httplib.h>

#include "safe/wire.hpp"

namespace safe::wire {

using WireHandler = std::function<WireResponse(const WireRequest&)>;

inline void attach_handler(httplib::Server& server, WireHandler handler,
                           std::function<void(const WireRequest&, int)> observer = {}) {
  const auto adapt = [handler = std::move(handler), observer = std::move(observer)](
                         const httplib::Request& req, httplib::Response& res) {
    WireRequest wr;
    wr.method = req.method;
    wr.path = req.target.empty() ? req.path : req.target;
    wr.body = req.body;
    const std::string auth = req.get_header_value("Authorization");
    constexpr const char* kBearer = "Bearer ";
    if (auth.rfind(kBearer, 0) == 0) wr.bearer_token = auth.substr(7);
    const WireResponse out = handler(wr);
    res.status = out.status;
    res.set_content(out.body, "application/json");
    if (observer) observer(wr, out.status);
  };
  server.Get(".*", adapt);
  server.Post(".*", adapt);
  server.Delete(".*", adapt);
}

}  // namespace safe::wire

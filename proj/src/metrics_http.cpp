// Copyright 2026 The Agentic Slicing Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <thread>

#include "httplib.h"
#include "slicing/error.hpp"
#include "slicing/metrics.hpp"

namespace slicing {

struct MetricsHttpServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

MetricsHttpServer::MetricsHttpServer(const MetricsRegistry& registry, const std::string& host,
                                     int port, std::string path)
    : impl_(std::make_unique<Impl>()) {
  impl_->server.Get(path, [&registry](const httplib::Request&, httplib::Response& res) {
    const MetricSnapshot snap = registry.snapshot();
    if (snap.empty()) {
      res.set_content("", "text/plain; version=0.0.4");
      return;
    }
    res.set_content(export_text(snap), "text/plain; version=0.0.4");
  });
  impl_->port = port == 0 ? impl_->server.bind_to_any_port(host) : port;
  if (port != 0 && !impl_->server.bind_to_port(host, port)) impl_->port = -1;
  if (impl_->port < 0) throw Error("cannot bind metrics endpoint on " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MetricsHttpServer::~MetricsHttpServer() { stop(); }

int MetricsHttpServer::port() const { return impl_->port; }

void MetricsHttpServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace slicing

"""Serve a backend over HTTP and drive it through the adapter client.

A real diffusion runtime would wrap its own backend object with
``handle_message`` the same way; here the mock stands in.

    python demos/05_adapter_server.py
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np

from stylviz import AdapterBackend, ChartSpec, MockBackend, PromptSpec, WorkflowConfig, run
from stylviz.backend import handle_message


def serve(backend):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            msg = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            body = json.dumps(handle_message(backend, msg)).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    httpd = HTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    return httpd


def main():
    httpd = serve(MockBackend())
    endpoint = f"http://127.0.0.1:{httpd.server_address[1]}/"
    remote = AdapterBackend(endpoint)
    print("remote capabilities:", sorted(remote.descriptor.capabilities))

    spec = ChartSpec.pie([2, 1, 1])
    prompts = PromptSpec("a pie chart", ["orange slice", "lemon slice"])
    cfg = WorkflowConfig(steps=20)
    a, _ = run(spec, prompts, cfg, remote)
    b, _ = run(spec, prompts, cfg, MockBackend())
    # latents cross the wire as float32, so tiny rounding differences are possible
    print("adapter vs in-process, max pixel difference:", float(np.abs(a - b).max()))
    httpd.shutdown()


if __name__ == "__main__":
    main()

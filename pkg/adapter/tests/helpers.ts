import { readFileSync } from "node:fs";
import { AddressInfo } from "node:net";
import { Server } from "node:http";
import { fileURLToPath } from "node:url";

import { Application } from "express";

import { SampleRequest } from "../src/protocol.js";

/** The engine's committed wire-protocol goldens, replayed verbatim. */
export function goldenBytes(kind: string): Buffer {
  const path = fileURLToPath(
    new URL(`../../tests/goldens/request_${kind}.json`, import.meta.url),
  );
  return readFileSync(path);
}

export function goldenRequest(kind: string): SampleRequest {
  return JSON.parse(goldenBytes(kind).toString("utf8")) as SampleRequest;
}

export interface RunningServer {
  url: string;
  close: () => Promise<void>;
}

export function startServer(app: Application): Promise<RunningServer> {
  return new Promise((resolve) => {
    const server: Server = app.listen(0, "127.0.0.1", () => {
      const { port } = server.address() as AddressInfo;
      resolve({
        url: `http://127.0.0.1:${port}`,
        close: () =>
          new Promise((done, fail) =>
            server.close((err) => (err ? fail(err) : done())),
          ),
      });
    });
  });
}

export async function postSample(
  url: string,
  body: string | Buffer,
): Promise<{ status: number; body: any }> {
  const response = await fetch(`${url}/v1/sample`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body,
  });
  return { status: response.status, body: await response.json() };
}

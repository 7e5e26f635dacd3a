// WS <-> TCP gateway: relays length-prefixed frames byte-for-byte between a
// browser socket at /ws and the engine's TCP port. Also serves the static
// console page. Engine host/port come from ?host=&port= query params.

import * as fs from 'node:fs';
import * as http from 'node:http';
import * as net from 'node:net';
import * as path from 'node:path';
import { fileURLToPath } from 'node:url';
import { WebSocketServer, WebSocket } from 'ws';

import { DEFAULT_PORT } from './protocol.js';

export interface GatewayOptions {
  port?: number; // 0 -> ephemeral
  engineHost?: string;
  enginePort?: number;
  staticDir?: string;
}

export interface Gateway {
  port: number;
  url: string; // ws://host:port/ws
  close(): Promise<void>;
}

const MIME: Record<string, string> = {
  '.html': 'text/html; charset=utf-8',
  '.js': 'text/javascript; charset=utf-8',
  '.map': 'application/json',
  '.css': 'text/css; charset=utf-8',
};

export function startGateway(opts: GatewayOptions = {}): Promise<Gateway> {
  const here = path.dirname(fileURLToPath(import.meta.url));
  const staticDir = opts.staticDir ?? path.resolve(here, '..', 'static');
  const distDir = path.resolve(here, '..', 'dist');
  const defaultHost = opts.engineHost ?? '127.0.0.1';
  const defaultPort = opts.enginePort ?? DEFAULT_PORT;

  const server = http.createServer((req, res) => {
    const url = new URL(req.url ?? '/', 'http://gateway');
    let file: string;
    if (url.pathname === '/' || url.pathname === '/index.html') {
      file = path.join(staticDir, 'index.html');
    } else if (url.pathname.startsWith('/dist/')) {
      file = path.join(distDir, url.pathname.slice('/dist/'.length));
    } else {
      file = path.join(staticDir, url.pathname.slice(1));
    }
    if (!file.startsWith(staticDir) && !file.startsWith(distDir)) {
      res.writeHead(403).end();
      return;
    }
    fs.readFile(file, (err, data) => {
      if (err) {
        res.writeHead(404).end('not found');
        return;
      }
      res.writeHead(200, { 'content-type': MIME[path.extname(file)] ?? 'application/octet-stream' });
      res.end(data);
    });
  });

  const wss = new WebSocketServer({ server, path: '/ws' });
  const live = new Set<{ ws: WebSocket; tcp: net.Socket }>();

  wss.on('connection', (ws, req) => {
    const url = new URL(req.url ?? '/ws', 'http://gateway');
    const host = url.searchParams.get('host') ?? defaultHost;
    const port = Number(url.searchParams.get('port') ?? defaultPort);

    const tcp = net.connect(port, host);
    const pair = { ws, tcp };
    live.add(pair);

    const cleanup = () => {
      live.delete(pair);
      tcp.destroy();
      ws.close();
    };

    tcp.on('connect', () => {
      ws.on('message', (data: Buffer) => tcp.write(data));
      tcp.on('data', (data) => ws.send(data));
    });

    tcp.on('error', cleanup);
    tcp.on('close', cleanup);
    ws.on('error', cleanup);
    ws.on('close', cleanup);
  });

  return new Promise((resolve) => {
    server.listen(opts.port ?? 0, '127.0.0.1', () => {
      const addr = server.address() as net.AddressInfo;
      resolve({
        port: addr.port,
        url: `ws://127.0.0.1:${addr.port}/ws`,
        close: () =>
          new Promise<void>((done) => {
            for (const { ws, tcp } of live) {
              tcp.destroy();
              ws.terminate();
            }
            wss.close(() => server.close(() => done()));
          }),
      });
    });
  });
}

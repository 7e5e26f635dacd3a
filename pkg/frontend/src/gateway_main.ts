// Entry point: node --loader ts-node/esm src/gateway_main.ts [--port N]
//   [--engine-host H] [--engine-port P]

import { startGateway } from './gateway.js';
import { DEFAULT_PORT } from './protocol.js';

function argValue(name: string): string | undefined {
  const i = process.argv.indexOf(name);
  return i >= 0 ? process.argv[i + 1] : undefined;
}

const gw = await startGateway({
  port: Number(argValue('--port') ?? 8080),
  engineHost: argValue('--engine-host') ?? '127.0.0.1',
  enginePort: Number(argValue('--engine-port') ?? DEFAULT_PORT),
});

console.log(`console at http://127.0.0.1:${gw.port}/  (frames relayed via ${gw.url})`);

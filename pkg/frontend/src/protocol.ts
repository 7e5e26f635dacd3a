// Wire codec for the engine protocol: every frame is a 4-byte big-endian
// length prefix followed by one UTF-8 JSON object. Shapes must stay in
// lockstep with the Python side; test/vectors/wire_vectors.json is the
// shared contract.

export const PROTOCOL_VERSION = 1;
export const DEFAULT_PORT = 7471;
export const HEADER_SIZE = 4;
export const MAX_FRAME = 1 << 20;
export const HEARTBEAT_MS = 500;

export type CommandKind =
  | 'PageOp'
  | 'DisplayStyle'
  | 'Pointer'
  | 'Pin'
  | 'Retake'
  | 'AdjustSlide'
  | 'AgentHint'
  | 'PositionReport'
  | 'RegisterRole'
  | 'MapTransfer'
  | 'PlaceSlide';

export interface CommandEnvelope {
  v: number;
  seq: number;
  kind: CommandKind;
  issued_at: number;
  payload: Record<string, unknown>;
}

export interface Ack {
  v: number;
  ack: number;
  status: 'applied' | 'rejected';
  completed_at: number;
  reason?: string;
}

export interface PointerInfo {
  active: boolean;
  u: number;
  v: number;
}

export interface SystemInfo {
  current_page: number;
  page_count: number;
  style: string;
  pin_page: number | null;
  pointer: PointerInfo;
  camera_mode: string;
  agent_popups: string[];
  last_ack_seq: number;
  assets: string[];
  t: number;
}

export type Message =
  | { type: 'command'; command: CommandEnvelope }
  | { type: 'ack'; ack: Ack }
  | { type: 'info'; info: SystemInfo };

export class MalformedFrame extends Error {}

/** A frame backed by a plain ArrayBuffer, as browser sockets require. */
export type Bytes = Uint8Array<ArrayBuffer>;

const utf8 = { enc: new TextEncoder(), dec: new TextDecoder('utf-8', { fatal: true }) };

export function frame(body: Uint8Array): Bytes {
  if (body.length > MAX_FRAME) throw new MalformedFrame(`frame too large: ${body.length}`);
  const out = new Uint8Array(new ArrayBuffer(HEADER_SIZE + body.length));
  new DataView(out.buffer).setUint32(0, body.length, false);
  out.set(body, HEADER_SIZE);
  return out;
}

export function encodeCommand(cmd: CommandEnvelope): Bytes {
  // key order matches the engine's encoder; either end accepts any order
  const obj = {
    v: cmd.v,
    seq: cmd.seq,
    kind: cmd.kind,
    issued_at: cmd.issued_at,
    payload: cmd.payload,
  };
  return frame(utf8.enc.encode(JSON.stringify(obj)));
}

export function decodeBody(body: Uint8Array): Message {
  let obj: unknown;
  try {
    obj = JSON.parse(utf8.dec.decode(body));
  } catch (e) {
    throw new MalformedFrame(`invalid frame body: ${e}`);
  }
  if (typeof obj !== 'object' || obj === null || Array.isArray(obj)) {
    throw new MalformedFrame('frame body is not an object');
  }
  const o = obj as Record<string, unknown>;
  if ('seq' in o && 'kind' in o) {
    return {
      type: 'command',
      command: {
        v: Number(o.v),
        seq: Number(o.seq),
        kind: String(o.kind) as CommandKind,
        issued_at: Number(o.issued_at),
        payload: (o.payload ?? {}) as Record<string, unknown>,
      },
    };
  }
  if ('ack' in o) {
    const ack: Ack = {
      v: Number(o.v),
      ack: Number(o.ack),
      status: String(o.status) as Ack['status'],
      completed_at: Number(o.completed_at),
    };
    if (o.reason != null) ack.reason = String(o.reason);
    return { type: 'ack', ack };
  }
  if ('info' in o) {
    const i = o.info as Record<string, unknown>;
    return {
      type: 'info',
      info: {
        current_page: Number(i.current_page),
        page_count: Number(i.page_count),
        style: String(i.style),
        pin_page: i.pin_page == null ? null : Number(i.pin_page),
        pointer: i.pointer as PointerInfo,
        camera_mode: String(i.camera_mode),
        agent_popups: (i.agent_popups ?? []) as string[],
        last_ack_seq: Number(i.last_ack_seq),
        assets: (i.assets ?? []) as string[],
        t: Number(o.t),
      },
    };
  }
  throw new MalformedFrame('unrecognized message shape');
}

/** Incremental splitter for the framed byte stream. */
export class FrameDecoder {
  private buf: Bytes = new Uint8Array(new ArrayBuffer(0));

  feed(data: Uint8Array): Bytes[] {
    const joined = new Uint8Array(new ArrayBuffer(this.buf.length + data.length));
    joined.set(this.buf, 0);
    joined.set(data, this.buf.length);
    this.buf = joined;

    const bodies: Bytes[] = [];
    while (this.buf.length >= HEADER_SIZE) {
      const n = new DataView(this.buf.buffer, this.buf.byteOffset).getUint32(0, false);
      if (n > MAX_FRAME) throw new MalformedFrame(`declared length ${n} too large`);
      if (this.buf.length < HEADER_SIZE + n) break;
      bodies.push(this.buf.slice(HEADER_SIZE, HEADER_SIZE + n));
      this.buf = this.buf.slice(HEADER_SIZE + n);
    }
    return bodies;
  }

  feedMessages(data: Uint8Array): Message[] {
    return this.feed(data).map(decodeBody);
  }
}

// Console-side session state machine. One socket, one UI event loop, a
// pending-command map keyed by seq. Mutations apply optimistically and roll
// back if the engine rejects; SystemInfo is authoritative once quiescent.

import {
  Ack,
  Bytes,
  CommandKind,
  FrameDecoder,
  SystemInfo,
  encodeCommand,
} from './protocol.js';

export const POINTER_MIN_GAP_MS = 50; // 20 Hz cap on Pointer frames
export const STALE_AFTER_MS = 2000;
export const RETRY_TIMEOUT_MS = 1000;

export interface ConsoleSocket {
  send(data: Bytes): void;
  close(): void;
  onMessage(cb: (data: Uint8Array) => void): void;
  onClose(cb: () => void): void;
}

export type ConnectionState = 'connecting' | 'ready' | 'reconnecting' | 'closed';

export interface PreviewState {
  page: number;
  pageCount: number;
  style: string;
  pinPage: number | null;
  pointer: { active: boolean; u: number; v: number };
  cameraMode: string;
  popups: string[];
  assets: string[];
}

function emptyView(): PreviewState {
  return {
    page: 0,
    pageCount: 0,
    style: 'single',
    pinPage: null,
    pointer: { active: false, u: 0.5, v: 0.5 },
    cameraMode: 'normal',
    popups: [],
    assets: [],
  };
}

interface Pending {
  seq: number;
  bytes: Bytes;
  snapshot: PreviewState;
  resolve: (ack: Ack) => void;
  retries: number;
  timer: ReturnType<typeof setTimeout> | null;
}

export interface SessionOptions {
  endpoint?: string;
  now?: () => number;
  retryMs?: number;
  maxRetries?: number;
}

export class ConsoleSession {
  state: ConnectionState = 'connecting';
  registered = false;
  view: PreviewState = emptyView();
  lastInfo: SystemInfo | null = null;
  toasts: string[] = [];
  selectedAsset: string | null = null;

  private socket: ConsoleSocket;
  private decoder = new FrameDecoder();
  private nextSeq = 1;
  private pending = new Map<number, Pending>();
  private endpoint: string;
  private now: () => number;
  private retryMs: number;
  private maxRetries: number;
  private lastInfoAt = 0;
  private highestAckedSeq = -1;
  private staleTimer: ReturnType<typeof setInterval> | null = null;
  private lastPointerSentAt = -Infinity;
  private queuedPointer: { u: number; v: number } | null = null;
  private pointerFlushTimer: ReturnType<typeof setTimeout> | null = null;
  private listeners: Array<() => void> = [];

  constructor(socket: ConsoleSocket, opts: SessionOptions = {}) {
    this.socket = socket;
    this.endpoint = opts.endpoint ?? 'console';
    this.now = opts.now ?? Date.now;
    this.retryMs = opts.retryMs ?? RETRY_TIMEOUT_MS;
    this.maxRetries = opts.maxRetries ?? 5;
    socket.onMessage((data) => this.handleBytes(data));
    socket.onClose(() => {
      this.state = 'closed';
      this.emitChange();
    });
  }

  subscribe(fn: () => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emitChange() {
    for (const l of this.listeners) l();
  }

  /** Claim the remote-operation role; registration rides seq 0. */
  register(): Promise<Ack> {
    const bytes = encodeCommand({
      v: 1,
      seq: 0,
      kind: 'RegisterRole',
      issued_at: this.now(),
      payload: { role: 'remote_operation', endpoint: this.endpoint },
    });
    return new Promise((resolve) => {
      this.pending.set(0, {
        seq: 0,
        bytes,
        snapshot: this.view,
        resolve: (ack) => {
          if (ack.status === 'applied') {
            this.registered = true;
            this.state = 'ready';
            this.lastInfoAt = this.now();
            this.startStaleWatch();
          } else {
            this.toasts.push(ack.reason ?? 'registration rejected');
          }
          this.emitChange();
          resolve(ack);
        },
        retries: 0,
        timer: null,
      });
      this.armRetry(0);
      this.socket.send(bytes);
    });
  }

  /** Frame and send one command; optimistic view change + rollback. */
  send(kind: CommandKind, payload: Record<string, unknown>): Promise<Ack> {
    if (!this.registered) {
      throw new Error('not registered: controls are disabled until the role is confirmed');
    }
    const seq = this.nextSeq++;
    const snapshot = { ...this.view, pointer: { ...this.view.pointer } };
    this.applyOptimistic(kind, payload);
    const bytes = encodeCommand({ v: 1, seq, kind, issued_at: this.now(), payload });
    return new Promise((resolve) => {
      this.pending.set(seq, {
        seq,
        bytes,
        snapshot,
        resolve: (ack) => {
          if (ack.status === 'rejected' && !this.ackLost(seq, ack)) {
            this.view = snapshot;
            this.toasts.push(ack.reason ?? 'rejected');
          }
          this.settleQuiescent();
          this.emitChange();
          resolve(ack);
        },
        retries: 0,
        timer: null,
      });
      this.armRetry(seq);
      this.socket.send(bytes);
      this.emitChange();
    });
  }

  // a rejection telling us the engine is already past our seq means the
  // command was applied and only the ack got lost
  private ackLost(seq: number, ack: Ack): boolean {
    const m = /expected (\d+)/.exec(ack.reason ?? '');
    return m !== null && Number(m[1]) > seq;
  }

  private armRetry(seq: number) {
    const p = this.pending.get(seq);
    if (!p) return;
    p.timer = setTimeout(() => {
      const still = this.pending.get(seq);
      if (!still) return;
      if (still.retries >= this.maxRetries) {
        this.state = 'reconnecting';
        this.emitChange();
        return;
      }
      still.retries += 1;
      this.socket.send(still.bytes); // same seq, protocol rule
      this.armRetry(seq);
    }, this.retryMs);
  }

  private applyOptimistic(kind: CommandKind, payload: Record<string, unknown>) {
    const v = this.view;
    switch (kind) {
      case 'PageOp': {
        const op = payload.op;
        // only locally-valid ops move the indicator; the engine still rules
        if (op === 'next' && v.page < v.pageCount) v.page += 1;
        else if (op === 'prev' && v.page > 1) v.page -= 1;
        else if (op === 'goto') {
          const p = Number(payload.page);
          if (p >= 1 && p <= v.pageCount) v.page = p;
        }
        break;
      }
      case 'DisplayStyle':
        v.style = String(payload.style);
        break;
      case 'Pin':
        v.pinPage = payload.page == null ? null : Number(payload.page);
        break;
      case 'Pointer':
        v.pointer = payload.active
          ? { active: true, u: Number(payload.u), v: Number(payload.v) }
          : { active: false, u: v.pointer.u, v: v.pointer.v };
        break;
      case 'PlaceSlide':
        v.pageCount = Number(payload.page_count ?? v.pageCount);
        v.page = 1;
        break;
      default:
        break; // Retake, AgentHint, ... do not change the preview
    }
  }

  // page / style / pin controls ------------------------------------------

  next() {
    return this.send('PageOp', { op: 'next' });
  }

  prev() {
    return this.send('PageOp', { op: 'prev' });
  }

  goto(page: number) {
    return this.send('PageOp', { op: 'goto', page });
  }

  setStyle(style: 'single' | 'multi_slide' | 'real_material') {
    return this.send('DisplayStyle', { style });
  }

  setPin(page: number | null) {
    return this.send('Pin', { page });
  }

  retake(method: 'text' | 'visual') {
    return this.send('Retake', { method });
  }

  sendHint(text: string) {
    return this.send('AgentHint', { text });
  }

  placeAsset(assetId: string, pageCount?: number, size: [number, number] = [1.6, 0.9]) {
    this.selectedAsset = assetId;
    const payload: Record<string, unknown> = { asset_id: assetId, size };
    if (pageCount != null) payload.page_count = pageCount;
    return this.send('PlaceSlide', payload);
  }

  /** Image reference for the preview pane: asset plus the page in view. */
  pageImage(): string | null {
    if (!this.selectedAsset || this.view.page < 1) return null;
    return `${this.selectedAsset}#${this.view.page}`;
  }

  // pointer drag, throttled to 20 Hz ---------------------------------------

  pointerDown(u: number, v: number) {
    this.sendPointerNow(u, v);
  }

  pointerMove(u: number, v: number) {
    const since = this.now() - this.lastPointerSentAt;
    if (since >= POINTER_MIN_GAP_MS) {
      this.sendPointerNow(u, v);
      return;
    }
    // trailing edge: remember the latest sample, flush when the window opens
    this.queuedPointer = { u, v };
    if (this.pointerFlushTimer === null) {
      this.pointerFlushTimer = setTimeout(() => {
        this.pointerFlushTimer = null;
        if (this.queuedPointer) {
          const q = this.queuedPointer;
          this.queuedPointer = null;
          this.sendPointerNow(q.u, q.v);
        }
      }, POINTER_MIN_GAP_MS - since);
    }
  }

  pointerUp() {
    if (this.pointerFlushTimer !== null) {
      clearTimeout(this.pointerFlushTimer);
      this.pointerFlushTimer = null;
    }
    this.queuedPointer = null;
    return this.send('Pointer', { active: false }); // release always goes out
  }

  private sendPointerNow(u: number, v: number) {
    this.lastPointerSentAt = this.now();
    void this.send('Pointer', { active: true, u, v });
  }

  // inbound ----------------------------------------------------------------

  private handleBytes(data: Uint8Array) {
    for (const msg of this.decoder.feedMessages(data)) {
      if (msg.type === 'ack') {
        this.highestAckedSeq = Math.max(this.highestAckedSeq, msg.ack.ack);
        const p = this.pending.get(msg.ack.ack);
        if (p) {
          if (p.timer !== null) clearTimeout(p.timer);
          this.pending.delete(msg.ack.ack);
          p.resolve(msg.ack);
        }
      } else if (msg.type === 'info') {
        this.lastInfo = msg.info;
        this.lastInfoAt = this.now();
        if (this.state === 'reconnecting') this.state = 'ready';
        this.settleQuiescent();
        this.emitChange();
      }
    }
  }

  // with nothing in flight the last SystemInfo is the truth, but only once
  // it reflects every command the engine has acked to us
  private settleQuiescent() {
    if (this.pending.size > 0 || !this.lastInfo) return;
    if (this.lastInfo.last_ack_seq < this.highestAckedSeq) return;
    const i = this.lastInfo;
    this.view = {
      page: i.current_page,
      pageCount: i.page_count,
      style: i.style,
      pinPage: i.pin_page,
      pointer: { ...i.pointer },
      cameraMode: i.camera_mode,
      popups: [...i.agent_popups],
      assets: [...i.assets],
    };
  }

  private startStaleWatch() {
    if (this.staleTimer !== null) return;
    this.staleTimer = setInterval(() => {
      if (this.state === 'ready' && this.now() - this.lastInfoAt > STALE_AFTER_MS) {
        this.state = 'reconnecting';
        this.emitChange();
      }
    }, 250);
  }

  close() {
    if (this.staleTimer !== null) clearInterval(this.staleTimer);
    if (this.pointerFlushTimer !== null) clearTimeout(this.pointerFlushTimer);
    for (const p of this.pending.values()) {
      if (p.timer !== null) clearTimeout(p.timer);
    }
    this.pending.clear();
    this.state = 'closed';
    this.socket.close();
  }
}

/** The slice of a WebSocket (browser or `ws` package) the console needs.
 * onmessage/onclose are write-only here, hence the loose typing. */
export interface WebSocketLike {
  binaryType: string;
  send(data: Bytes): void;
  close(): void;
  onmessage: unknown;
  onclose: unknown;
}

export function wrapWebSocket(ws: WebSocketLike): ConsoleSocket {
  ws.binaryType = 'arraybuffer';
  return {
    send: (data) => ws.send(data),
    close: () => ws.close(),
    onMessage: (cb) => {
      ws.onmessage = (ev: { data: unknown }) => {
        const d = ev.data;
        if (d instanceof ArrayBuffer) cb(new Uint8Array(d));
        else if (ArrayBuffer.isView(d)) {
          cb(new Uint8Array(d.buffer, d.byteOffset, d.byteLength));
        }
      };
    },
    onClose: (cb) => {
      ws.onclose = cb;
    },
  };
}

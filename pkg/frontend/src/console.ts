// Browser wiring for the remote console page. Connects through the gateway
// at /ws (engine host/port forwarded from this page's own query params).

import { ConsoleSession, wrapWebSocket } from './session.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const params = new URLSearchParams(location.search);
const wsUrl = new URL('/ws', location.href);
wsUrl.protocol = location.protocol === 'https:' ? 'wss:' : 'ws:';
for (const k of ['host', 'port']) {
  const v = params.get(k);
  if (v) wsUrl.searchParams.set(k, v);
}

const banner = el<HTMLDivElement>('banner');
const pageLabel = el<HTMLSpanElement>('page');
const styleSelect = el<HTMLSelectElement>('style');
const pinLabel = el<HTMLSpanElement>('pin');
const cameraLabel = el<HTMLSpanElement>('camera');
const popupList = el<HTMLUListElement>('popups');
const toastList = el<HTMLUListElement>('toasts');
const assetList = el<HTMLUListElement>('assets');
const pad = el<HTMLDivElement>('pad');
const controls = el<HTMLDivElement>('controls');

function connect() {
  banner.textContent = 'connecting...';
  const ws = new WebSocket(wsUrl);
  const session = new ConsoleSession(wrapWebSocket(ws), { endpoint: 'browser-console' });

  ws.onopen = async () => {
    const ack = await session.register();
    if (ack.status !== 'applied') {
      banner.textContent = `registration failed: ${ack.reason ?? 'rejected'}`;
      return;
    }
    controls.classList.remove('disabled');
    render();
  };

  ws.onerror = () => {
    banner.textContent = 'engine unreachable';
    showRetry();
  };

  function showRetry() {
    controls.classList.add('disabled');
    const retry = document.createElement('button');
    retry.textContent = 'retry';
    retry.onclick = () => {
      retry.remove();
      connect();
    };
    banner.appendChild(retry);
  }

  function render() {
    banner.textContent =
      session.state === 'ready' ? 'live' :
      session.state === 'reconnecting' ? 'reconnecting...' : session.state;
    pageLabel.textContent = `${session.view.page} / ${session.view.pageCount}`;
    styleSelect.value = session.view.style;
    pinLabel.textContent = session.view.pinPage === null ? 'off' : `page ${session.view.pinPage}`;
    cameraLabel.textContent = session.view.cameraMode;
    popupList.replaceChildren(
      ...session.view.popups.map((t) => {
        const li = document.createElement('li');
        li.textContent = t;
        return li;
      }),
    );
    toastList.replaceChildren(
      ...session.toasts.slice(-5).map((t) => {
        const li = document.createElement('li');
        li.textContent = t;
        return li;
      }),
    );
    assetList.replaceChildren(
      ...session.view.assets.map((a) => {
        const li = document.createElement('li');
        const btn = document.createElement('button');
        btn.textContent = a;
        btn.onclick = () => void session.placeAsset(a);
        li.appendChild(btn);
        return li;
      }),
    );
  }

  session.subscribe(render);

  el<HTMLButtonElement>('prev').onclick = () => void session.prev();
  el<HTMLButtonElement>('next').onclick = () => void session.next();
  el<HTMLButtonElement>('pin-toggle').onclick = () =>
    void session.setPin(session.view.pinPage === null ? session.view.page : null);
  el<HTMLButtonElement>('retake-text').onclick = () => void session.retake('text');
  el<HTMLButtonElement>('retake-visual').onclick = () => void session.retake('visual');
  el<HTMLButtonElement>('hint').onclick = () => {
    const text = prompt('hint for the lecturer');
    if (text) void session.sendHint(text);
  };
  styleSelect.onchange = () =>
    void session.setStyle(styleSelect.value as 'single' | 'multi_slide' | 'real_material');

  const uv = (ev: PointerEvent): [number, number] => {
    const r = pad.getBoundingClientRect();
    return [
      Math.min(1, Math.max(0, (ev.clientX - r.left) / r.width)),
      Math.min(1, Math.max(0, (ev.clientY - r.top) / r.height)),
    ];
  };
  let dragging = false;
  pad.onpointerdown = (ev) => {
    dragging = true;
    pad.setPointerCapture(ev.pointerId);
    session.pointerDown(...uv(ev));
  };
  pad.onpointermove = (ev) => {
    if (dragging) session.pointerMove(...uv(ev));
  };
  pad.onpointerup = () => {
    dragging = false;
    void session.pointerUp();
  };
}

connect();

/** Websocket transport: one binary message per protocol frame.
 *
 * The socket implementation is injected so the console runs on the browser's
 * `WebSocket` while tests drive the same code with the `ws` package (or a
 * fake).  Only the handful of members both implementations share is used.
 */

export interface Transport {
  send(frame: Uint8Array<ArrayBuffer>): void;
  close(): void;
}

export interface TransportHooks {
  onOpen(): void;
  onFrame(frame: Uint8Array): void;
  onClose(): void;
}

export interface WebSocketLike {
  binaryType: string;
  // Handler params are `any` so both the DOM WebSocket and the `ws` package
  // satisfy this shape; the handlers narrow what they touch.
  onopen: ((event: any) => void) | null;
  onmessage: ((event: any) => void) | null;
  onclose: ((event: any) => void) | null;
  onerror: ((event: any) => void) | null;
  // Plain-ArrayBuffer-backed views only: the DOM socket's send() rejects
  // views that might sit on a SharedArrayBuffer.
  send(data: Uint8Array<ArrayBuffer>): void;
  close(): void;
}

export type WebSocketFactory = (url: string) => WebSocketLike;

export function openSocket(
  url: string,
  hooks: TransportHooks,
  factory: WebSocketFactory,
): Transport {
  const socket = factory(url);
  socket.binaryType = "arraybuffer";
  let closed = false;
  const closeOnce = () => {
    if (!closed) {
      closed = true;
      hooks.onClose();
    }
  };
  socket.onopen = () => hooks.onOpen();
  socket.onmessage = (event: { data: unknown }) => {
    const data = event.data;
    if (data instanceof ArrayBuffer) {
      hooks.onFrame(new Uint8Array(data));
    }
  };
  socket.onclose = closeOnce;
  socket.onerror = closeOnce;
  return {
    send(frame) {
      socket.send(frame);
    },
    close() {
      socket.close();
      closeOnce();
    },
  };
}

/** Reconnect backoff: 0.25 s doubling to a 4 s ceiling. */
export class Reconnector {
  private delay = 0;

  constructor(
    private readonly connect: () => void,
    private readonly schedule: (fn: () => void, ms: number) => void,
  ) {}

  opened(): void {
    this.delay = 0;
  }

  closed(): void {
    this.delay = this.delay === 0 ? 250 : Math.min(this.delay * 2, 4000);
    this.schedule(this.connect, this.delay);
  }
}

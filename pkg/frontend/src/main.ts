/** Console boot: fetch the session description, connect, wire the DOM. */

import { Chain, ModelDoc } from "./kinematics.js";
import { SIDE_VIEW, TOP_VIEW, renderView } from "./render.js";
import { DragTracker, wheelToZ } from "./stage.js";
import { Reconnector, Transport, openSocket } from "./transport.js";
import { ConsoleConfig, ConsoleViewModel } from "./viewmodel.js";

function byId<T extends HTMLElement>(id: string): T {
  const element = document.getElementById(id);
  if (element === null) {
    throw new Error(`missing element #${id}`);
  }
  return element as T;
}

function fmt(v: number): string {
  return (v >= 0 ? "+" : "") + v.toFixed(3);
}

async function boot(): Promise<void> {
  const config = (await (await fetch("/config")).json()) as ConsoleConfig;
  const model = (await (await fetch("/model")).json()) as ModelDoc;
  const chain = new Chain(model);
  const vm = new ConsoleViewModel(config);

  const sideCtx = byId<HTMLCanvasElement>("side").getContext("2d")!;
  const stageCtx = byId<HTMLCanvasElement>("stage").getContext("2d")!;
  const connectionEl = byId<HTMLSpanElement>("connection");
  const modeEl = byId<HTMLSpanElement>("mode");
  const safetyEl = byId<HTMLSpanElement>("safety");
  const eeEl = byId<HTMLSpanElement>("ee");
  const offsetEl = byId<HTMLSpanElement>("offset");
  const errorsEl = byId<HTMLUListElement>("errors");
  byId<HTMLSpanElement>("session-label").textContent =
    `${config.session} / ${config.arm} / ${config.model} (${config.decoupling})`;
  byId<HTMLSpanElement>("alpha-label").textContent =
    `alpha_l ${config.alpha_l} · alpha_r ${config.alpha_r}`;

  // ---- connection with backoff ----

  let transport: Transport | null = null;
  const url = `ws://${location.host}/`;
  const reconnector = new Reconnector(
    () => connect(),
    (fn, ms) => window.setTimeout(fn, ms),
  );
  function connect(): void {
    connectionEl.textContent = "connecting";
    const opened = openSocket(
      url,
      {
        onOpen: () => {
          transport = opened;
          vm.attach(opened);
          reconnector.opened();
        },
        onFrame: (frame) => vm.handleFrame(frame),
        onClose: () => {
          transport = null;
          vm.detach();
          reconnector.closed();
        },
      },
      (u) => new WebSocket(u),
    );
  }
  connect();
  window.setInterval(() => vm.heartbeat(), 100);

  // ---- device inputs ----

  const stageCanvas = byId<HTMLCanvasElement>("stage");
  const tracker = new DragTracker();
  stageCanvas.addEventListener("pointerdown", (event) => {
    stageCanvas.setPointerCapture(event.pointerId);
    tracker.start(event.offsetX, event.offsetY);
  });
  stageCanvas.addEventListener("pointermove", (event) => {
    const delta = tracker.move(event.offsetX, event.offsetY);
    if (delta !== null) {
      vm.moveStylus(delta[0], delta[1], delta[2]);
    }
  });
  const endDrag = () => tracker.end();
  stageCanvas.addEventListener("pointerup", endDrag);
  stageCanvas.addEventListener("pointercancel", endDrag);
  stageCanvas.addEventListener("wheel", (event) => {
    event.preventDefault();
    vm.moveStylus(0, 0, wheelToZ(event.deltaY));
  });

  byId<HTMLButtonElement>("pedal").addEventListener("click", () => vm.pedal());
  window.addEventListener("keydown", (event) => {
    if (event.code === "Space" && event.target === document.body) {
      event.preventDefault();
      vm.pedal();
    }
  });
  byId<HTMLInputElement>("grip").addEventListener("input", (event) => {
    vm.setGrip(parseFloat((event.target as HTMLInputElement).value));
  });
  byId<HTMLButtonElement>("estop").addEventListener("click", () =>
    vm.estop("console estop button"),
  );
  byId<HTMLButtonElement>("reset").addEventListener("click", () => vm.resetArm());

  // ---- render loop ----

  function frame(): void {
    renderView(sideCtx, SIDE_VIEW, chain, vm);
    renderView(stageCtx, TOP_VIEW, chain, vm);

    connectionEl.textContent = vm.connection;
    connectionEl.className = `value ${vm.connection}`;
    const state = vm.state;
    if (state !== null) {
      modeEl.textContent = state.mode + (state.pending ? " (handover pending)" : "");
      safetyEl.textContent = state.estopped
        ? `E-STOP: ${state.estop_reason ?? ""}`
        : state.safe_hold
          ? "safe hold"
          : "tracking";
      safetyEl.className = `value ${state.estopped ? "estop" : state.safe_hold ? "hold" : "ok"}`;
      eeEl.textContent = state.ee_position.map(fmt).join(" ");
    }
    const commanded = vm.commandedOffset();
    const reported = vm.reportedOffset();
    offsetEl.textContent =
      commanded !== null && reported !== null
        ? `commanded ${commanded.map(fmt).join(" ")} · reported ${reported.map(fmt).join(" ")}`
        : "-";
    errorsEl.replaceChildren(
      ...vm.errors.slice(-6).map((note) => {
        const item = document.createElement("li");
        item.textContent = `${note.code}: ${note.text}`;
        return item;
      }),
    );
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

boot().catch((exc) => {
  document.body.insertAdjacentText("beforeend", `console failed to boot: ${exc}`);
});

/** Browser bootstrap: wires App state to the page. Kept deliberately thin —
 * all behavior lives in app.ts / views.ts, which the test suite covers. */

import { ApiClient } from "./api.js";
import { App } from "./app.js";
import { renderDiff, renderEditor, renderGallery, renderJobPanel,
         renderToast } from "./views.js";
import { Point } from "./draft.js";

export async function boot(root: HTMLElement): Promise<App> {
  const app = new App(new ApiClient());
  const galleryEl = document.createElement("div");
  const editorEl = document.createElement("div");
  const jobEl = document.createElement("div");
  const toastEl = document.createElement("div");
  root.append(galleryEl, editorEl, jobEl, toastEl);

  const drawGallery = () => {
    galleryEl.innerHTML = renderGallery(app.images, {
      jobRunning: app.monitor.job?.status === "running",
      error: app.galleryError ?? undefined,
    });
  };
  const drawEditor = () => {
    const s = app.session;
    editorEl.innerHTML = s
      ? renderEditor(s.imageId, s.prediction, s.draft, s.preview())
      : "";
  };
  const toast = (message: string) => {
    toastEl.innerHTML = renderToast(message);
    setTimeout(() => { toastEl.innerHTML = ""; }, 4000);
  };

  galleryEl.addEventListener("click", async (ev) => {
    const card = (ev.target as HTMLElement).closest<HTMLElement>("[data-image-id]");
    if (!card) return;
    await app.openEditor(card.dataset.imageId!);
    drawEditor();
  });

  editorEl.addEventListener("click", async (ev) => {
    const s = app.session;
    if (!s) return;
    const target = ev.target as HTMLElement;
    if (target.closest("svg")) {
      const rect = editorEl.querySelector("svg")!.getBoundingClientRect();
      s.draft.addPoint([ev.clientX - rect.left, ev.clientY - rect.top] as Point);
    } else if (target.matches(".undo")) {
      s.draft.undoPoint();
    } else if (target.matches(".commit")) {
      if (!s.draft.commitSegment()) toast("A segment needs at least 2 points.");
    } else if (target.matches(".submit")) {
      const before = s.prediction;
      const result = await s.submit();
      if (!result.ok) {
        toast(result.message ?? "submit failed");
      } else {
        await app.refreshGallery();
        drawGallery();
        const started = await app.monitor.start();
        if (!started.ok) {
          toast(started.message ?? "fine-tune failed to start");
        } else {
          const final = await app.monitor.watch(() => {
            jobEl.innerHTML = renderJobPanel(app.monitor.job);
          });
          if (final.status === "done" && before) {
            await s.loadPrediction();
            editorEl.innerHTML = renderDiff(
              s.imageId, before, s.prediction!, s.draft.view, null);
            return;
          }
        }
      }
      drawEditor();
    }
    drawEditor();
    jobEl.innerHTML = renderJobPanel(app.monitor.job);
  });

  await app.refreshGallery();
  drawGallery();
  jobEl.innerHTML = renderJobPanel(app.monitor.job);
  return app;
}

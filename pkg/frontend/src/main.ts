/** Browser entry point: mounts the app from URL query parameters. */

import { ServiceClient, type Condition } from "./api.js";
import { App } from "./app.js";

function param(name: string, fallback: string | null = null): string | null {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

async function boot(): Promise<void> {
  const root = document.getElementById("app");
  if (root === null) {
    throw new Error("missing #app mount point");
  }
  const client = new ServiceClient({
    baseUrl: param("api", window.location.origin) as string,
    authToken: param("token"),
  });
  const condition = (param("condition", "feedback") as Condition) ?? "feedback";
  await App.start({
    client,
    root,
    promptId: param("prompt", "p1") as string,
    condition,
    sessionId: param("session"),
    showScores: param("scores") === "1",
    window,
  });
}

void boot();

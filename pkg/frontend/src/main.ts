/** Browser entry point: mount the app on #app, variant from the query. */

import { ExperimentApi } from "./api";
import { createApp } from "./ui";

function mount(): void {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app mount point");
  const params = new URLSearchParams(window.location.search);
  const variant = Number(params.get("variant") ?? "1");
  createApp(root, new ExperimentApi(""), { variant });
}

if (document.readyState === "loading") {
  document.addEventListener("DOMContentLoaded", mount);
} else {
  mount();
}

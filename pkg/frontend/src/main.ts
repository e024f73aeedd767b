import { startApp } from "./app.js";

window.addEventListener("load", () => {
  startApp().catch((error) => {
    const banner = document.getElementById("error-banner");
    if (banner) {
      banner.textContent = `failed to load session: ${error}`;
      banner.style.display = "";
    }
  });
});

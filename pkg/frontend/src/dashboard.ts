// Device and program cards, refreshed from gateway queries and stream pushes.

import { ApiError, HearthClient } from "./api.js";
import { deviceCard, programCard } from "./render.js";
import type { AppState } from "./state.js";
import type { CatalogJson, SnapshotJson } from "./types.js";

export class DashboardController {
  catalog: CatalogJson | null = null;

  constructor(
    private readonly client: HearthClient,
    private readonly devicesRoot: HTMLElement,
    private readonly programsRoot: HTMLElement,
    private readonly onEdit: (programId: string) => void = () => {},
    private readonly onNotice: (text: string) => void = () => {},
  ) {}

  async ensureCatalog(): Promise<void> {
    if (this.catalog === null) {
      this.catalog = await this.client.catalog();
    }
  }

  renderDevices(state: AppState): void {
    this.devicesRoot.textContent = "";
    for (const device of state.devices) {
      this.devicesRoot.appendChild(
        deviceCard(device, this.catalog, {
          onAction: (id, action, args) =>
            void this.client
              .deviceAction(id, action, args)
              .catch((err) => this.noticeFrom(err)),
          onCritical: (id, critical) =>
            void this.client.setCritical(id, critical).catch((err) => this.noticeFrom(err)),
        }),
      );
    }
    if (!state.devices.length) {
      const empty = document.createElement("p");
      empty.textContent = "no devices yet";
      this.devicesRoot.appendChild(empty);
    }
  }

  renderPrograms(snapshots: SnapshotJson[]): void {
    this.programsRoot.textContent = "";
    for (const snap of snapshots.sort((a, b) => a.program_id.localeCompare(b.program_id))) {
      this.programsRoot.appendChild(
        programCard(snap, {
          onStart: (id) => void this.client.startProgram(id).catch((err) => this.noticeFrom(err)),
          onStop: (id) => void this.client.stopProgram(id).catch((err) => this.noticeFrom(err)),
          onEdit: this.onEdit,
        }),
      );
    }
  }

  private noticeFrom(err: unknown): void {
    if (err instanceof ApiError) {
      this.onNotice(`${err.code}: ${err.message}`);
    } else {
      throw err;
    }
  }
}

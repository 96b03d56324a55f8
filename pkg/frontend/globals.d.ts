// Minimal typings for the extension APIs this project touches; the full
// chrome typings are heavyweight and unnecessary here.
declare namespace chrome {
  const runtime: {
    sendMessage(message: unknown): Promise<any>;
    onMessage: {
      addListener(
        handler: (message: any, sender: any, sendResponse: (reply?: any) => void) => boolean | void,
      ): void;
    };
  };
  const tabs: {
    query(info: { active: boolean; currentWindow: boolean }): Promise<Array<{ id?: number }>>;
    sendMessage(tabId: number, message: unknown): Promise<any>;
  };
  const downloads: {
    download(options: { url: string; filename: string; saveAs?: boolean }): Promise<number>;
  };
}
